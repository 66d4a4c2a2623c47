use rfr_core::nn::ModelParams;
use serde::{Deserialize, Serialize};

use crate::corollary::{check_joint, split_joint};
use crate::law::PerturbationLaw;
use crate::loss::PointLoss;
use crate::ot::TransportPlan;
use crate::{DiscreteDistribution, Error, Result};

/// Largest admissible ratio `mismatch(s/2) / mismatch(s)`; exact first-order
/// agreement gives about 1/4.
pub const DECAY_RATIO: f64 = 0.35;

/// Mismatches at or below this are treated as exact and not ratioed.
pub const MISMATCH_FLOOR: f64 = 1e-13;

/// How the label displacement `δ_Y` enters the first-order data side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelChannel {
    /// Through the loss's own label derivative, `∂l/∂y · δ_Y`.
    #[default]
    LossLabelDerivative,
    /// Through `∂l/∂f · ∂f/∂Y · δ_Y`; the network does not read `Y`, so the
    /// term vanishes.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem2Status {
    Ok,
    /// Right-hand side is zero; `Δθ = 0` solves the condition.
    TrivialRhs,
    /// Parameter gradient is zero while the right-hand side is not: no
    /// weight perturbation matches at first order.
    Unrepresentable,
}

/// Source points paired with displacements and masses. Masses sum to 1.
#[derive(Debug, Clone)]
pub struct Coupling {
    points: Vec<Vec<f64>>,
    /// `(source index, δ, mass)`
    entries: Vec<(usize, Vec<f64>, f64)>,
}

impl Coupling {
    /// `s` and `δ` drawn independently.
    pub fn product(source: &DiscreteDistribution, law: &PerturbationLaw) -> Result<Self> {
        if law.dim() != source.dim() {
            return Err(Error::Dimension {
                context: "displacements",
                expected: source.dim(),
                actual: law.dim(),
            });
        }
        let mut entries = Vec::new();
        for (i, a) in source.mass().iter().enumerate() {
            for (d, m) in law.support().iter().zip(law.mass()) {
                entries.push((i, d.clone(), a * m));
            }
        }
        Ok(Self {
            points: source.support().to_vec(),
            entries,
        })
    }

    /// `δ = t − s` distributed jointly with `s` as the plan prescribes.
    pub fn from_plan(plan: &TransportPlan) -> Self {
        let src = plan.source().support();
        let tgt = plan.target().support();
        let entries = plan
            .gamma()
            .indexed_iter()
            .filter(|(_, g)| **g > 0.0)
            .map(|((i, j), g)| (i, tgt[j].iter().zip(&src[i]).map(|(t, s)| t - s).collect(), *g))
            .collect();
        Self {
            points: src.to_vec(),
            entries,
        }
    }

    /// Marginal mass of each source point.
    fn source_mass(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.points.len()];
        for (i, _, m) in &self.entries {
            a[*i] += m;
        }
        a
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub loss: PointLoss,
    pub label_channel: LabelChannel,
    pub status: Theorem2Status,
    /// `‖E[∂l/∂f ∇_θ f]‖₂`
    pub param_gradient_norm: f64,
    /// First-order data-side change per unit scale.
    pub rhs: f64,
    pub delta_theta_norm: f64,
    pub scales: Vec<f64>,
    pub mismatches: Vec<f64>,
    /// `mismatch(s_{k+1}) / mismatch(s_k)`, 0 when `mismatch(s_k)` is below
    /// the floor.
    pub ratios: Vec<f64>,
    pub decays_quadratically: bool,
}

pub fn check_theorem2(
    params: &ModelParams,
    source: &DiscreteDistribution,
    law: &PerturbationLaw,
    loss: PointLoss,
    channel: LabelChannel,
    scales: &[f64],
) -> Result<Theorem2Report> {
    check_joint(params, source)?;
    check_theorem2_coupled(params, &Coupling::product(source, law)?, loss, channel, scales)
}

/// Solves the first-order matching condition for the minimum-norm `Δθ` and
/// measures how the gap between data and weight perturbation shrinks with
/// the scale `s`.
pub fn check_theorem2_coupled(
    params: &ModelParams,
    coupling: &Coupling,
    loss: PointLoss,
    channel: LabelChannel,
    scales: &[f64],
) -> Result<Theorem2Report> {
    let d = params.input_dim();
    if coupling.points.first().map(Vec::len) != Some(d + 1) {
        return Err(Error::Dimension {
            context: "joint (x, y) points",
            expected: d + 1,
            actual: coupling.points.first().map_or(0, Vec::len),
        });
    }
    if scales.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
        return Err(Error::InvalidArgument("scales must lie in (0, 1]".into()));
    }
    let (x, y) = split_joint(&coupling.points);
    let f = params.forward(x.view())?;
    let grad_x = params.input_gradients(x.view())?;
    let a = coupling.source_mass();

    let weights: Vec<f64> = (0..x.nrows()).map(|i| a[i] * loss.d_pred(f[i], y[i])).collect();
    let g = params.backward(x.view(), &weights)?;
    let g_sq: f64 = g.iter().map(|v| v * v).sum();

    let mut rhs = 0.0;
    let mut rhs_scale = 0.0;
    for (i, delta, m) in &coupling.entries {
        let dx: f64 = (0..d).map(|k| grad_x[[*i, k]] * delta[k]).sum();
        let label_term = match channel {
            LabelChannel::LossLabelDerivative => loss.d_label(f[*i], y[*i]) * delta[d],
            LabelChannel::PaperLiteral => 0.0,
        };
        let term = m * (loss.d_pred(f[*i], y[*i]) * dx + label_term);
        rhs += term;
        rhs_scale += term.abs();
    }

    let trivial = rhs.abs() <= 1e-12 * rhs_scale || rhs_scale == 0.0;
    let (status, delta_theta) = if trivial {
        (Theorem2Status::TrivialRhs, vec![0.0; g.len()])
    } else if g_sq.sqrt() <= 1e-12 {
        (Theorem2Status::Unrepresentable, vec![0.0; g.len()])
    } else {
        (Theorem2Status::Ok, g.iter().map(|v| rhs * v / g_sq).collect())
    };

    let mut mismatches = Vec::with_capacity(scales.len());
    for &s in scales {
        let moved: Vec<Vec<f64>> = coupling
            .entries
            .iter()
            .map(|(i, delta, _)| coupling.points[*i].iter().zip(delta).map(|(p, d)| p + s * d).collect())
            .collect();
        let (xm, ym) = split_joint(&moved);
        let fm = params.forward(xm.view())?;
        let data_side: f64 = coupling
            .entries
            .iter()
            .zip(fm.iter().zip(&ym))
            .map(|((_, _, m), (f, y))| m * loss.value(*f, *y))
            .sum();

        let step: Vec<f64> = delta_theta.iter().map(|v| s * v).collect();
        let fw = params.perturb(&step)?.forward(x.view())?;
        let weight_side: f64 = (0..x.nrows()).map(|i| a[i] * loss.value(fw[i], y[i])).sum();
        mismatches.push((data_side - weight_side).abs());
    }
    let ratios: Vec<f64> = mismatches
        .windows(2)
        .map(|w| if w[0] <= MISMATCH_FLOOR { 0.0 } else { w[1] / w[0] })
        .collect();
    let decays_quadratically = ratios.iter().all(|r| *r <= DECAY_RATIO);

    Ok(Theorem2Report {
        loss,
        label_channel: channel,
        status,
        param_gradient_norm: g_sq.sqrt(),
        rhs,
        delta_theta_norm: delta_theta.iter().map(|v| v * v).sum::<f64>().sqrt(),
        scales: scales.to_vec(),
        mismatches,
        ratios,
        decays_quadratically,
    })
}

/// `{1, 1/2, 1/4, 1/8}`: three consecutive halvings.
pub fn halving_scales() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125]
}
