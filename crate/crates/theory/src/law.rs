use serde::{Deserialize, Serialize};

use crate::ot::TransportPlan;
use crate::{Error, Result};

/// Displacements closer than this (max-coordinate, relative) are one atom.
pub const GROUPING_TOL: f64 = 1e-12;

/// Distribution of displacements `δ = t − s` induced by a transport plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationLaw {
    support: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl PerturbationLaw {
    pub fn new(support: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != mass.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} displacements with {} masses",
                support.len(),
                mass.len()
            )));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 || mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("law masses sum to {total}")));
        }
        Ok(Self { support, mass })
    }

    pub fn point_mass(delta: Vec<f64>) -> Self {
        Self {
            support: vec![delta],
            mass: vec![1.0],
        }
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    /// `E[‖δ‖₂^p]`.
    pub fn power_moment(&self, p: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(d, m)| m * d.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
            .sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (d, m) in self.support.iter().zip(&self.mass) {
            for (o, v) in out.iter_mut().zip(d) {
                *o += m * v;
            }
        }
        out
    }
}

fn same_atom(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= GROUPING_TOL * (1.0 + x.abs().max(y.abs())))
}

/// Aggregates plan mass by displacement. Zero-mass plan entries are skipped.
pub fn perturbation_law(plan: &TransportPlan) -> PerturbationLaw {
    let src = plan.source().support();
    let tgt = plan.target().support();
    let mut support: Vec<Vec<f64>> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for ((i, j), &g) in plan.gamma().indexed_iter() {
        if g == 0.0 {
            continue;
        }
        let delta: Vec<f64> = tgt[j].iter().zip(&src[i]).map(|(t, s)| t - s).collect();
        match support.iter().position(|d| same_atom(d, &delta)) {
            Some(k) => mass[k] += g,
            None => {
                support.push(delta);
                mass.push(g);
            }
        }
    }
    PerturbationLaw { support, mass }
}

/// Largest absolute error between the target masses and the mass obtained by
/// drawing `s` from the source and then `δ` from the plan's conditional law
/// given `s`. Exact accounting; no sampling. Returns infinity if some `s + δ`
/// lands off the target support.
pub fn pushforward_error(plan: &TransportPlan) -> f64 {
    let src = plan.source();
    let tgt = plan.target();
    let mut pushed = vec![0.0; tgt.len()];
    for (i, s) in src.support().iter().enumerate() {
        let a = src.mass()[i];
        if a == 0.0 {
            continue;
        }
        for (j, t) in tgt.support().iter().enumerate() {
            let conditional = plan.gamma()[[i, j]] / a;
            if conditional == 0.0 {
                continue;
            }
            let landed: Vec<f64> = s.iter().zip(t).map(|(s, t)| s + (t - s)).collect();
            let Some(k) = tgt
                .support()
                .iter()
                .position(|t| t.iter().zip(&landed).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs())))
            else {
                return f64::INFINITY;
            };
            pushed[k] += a * conditional;
        }
    }
    pushed
        .iter()
        .zip(tgt.mass())
        .map(|(p, b)| (p - b).abs())
        .fold(0.0, f64::max)
}
