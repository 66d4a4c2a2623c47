use ndarray::Array2;
use rfr_core::nn::ModelParams;
use serde::{Deserialize, Serialize};

use crate::loss::PointLoss;
use crate::ot::{solve_ot, TransportPlan};
use crate::{DiscreteDistribution, Error, Result};

/// Splits joint `(x, y)` points (label last) into a feature matrix and labels.
pub(crate) fn split_joint(points: &[Vec<f64>]) -> (Array2<f64>, Vec<f64>) {
    let d = points[0].len() - 1;
    let x = Array2::from_shape_fn((points.len(), d), |(i, j)| points[i][j]);
    let y = points.iter().map(|p| p[d]).collect();
    (x, y)
}

pub(crate) fn check_joint(params: &ModelParams, dist: &DiscreteDistribution) -> Result<()> {
    if dist.dim() != params.input_dim() + 1 {
        return Err(Error::Dimension {
            context: "joint (x, y) points",
            expected: params.input_dim() + 1,
            actual: dist.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub loss: PointLoss,
    pub cost_exponent: f64,
    pub n_source: usize,
    pub n_target: usize,
    /// `E_tgt[l(f(x), y)]`
    pub target_loss: f64,
    /// `E_{s, δ}[l(f(x + δ_X), y + δ_Y)]`
    pub perturbed_source_loss: f64,
    pub gap: f64,
}

/// Compares the target risk with the source risk under the optimal data
/// perturbation. Points are joint `(x, y)` vectors with the label last; the
/// plan is computed over the joint space.
pub fn check_corollary1(
    params: &ModelParams,
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    loss: PointLoss,
    cost_exponent: f64,
) -> Result<CorollaryReport> {
    check_joint(params, source)?;
    check_joint(params, target)?;
    let plan = solve_ot(source, target, cost_exponent)?;
    check_corollary1_with_plan(params, &plan, loss)
}

/// Same comparison for an arbitrary feasible plan; the identity holds for
/// every coupling, not only the optimal one.
pub fn check_corollary1_with_plan(
    params: &ModelParams,
    plan: &TransportPlan,
    loss: PointLoss,
) -> Result<CorollaryReport> {
    let (src, tgt) = (plan.source(), plan.target());
    check_joint(params, src)?;
    check_joint(params, tgt)?;

    let (xt, yt) = split_joint(tgt.support());
    let ft = params.forward(xt.view())?;
    let target_loss: f64 = tgt
        .mass()
        .iter()
        .zip(ft.iter().zip(&yt))
        .map(|(m, (f, y))| m * loss.value(*f, *y))
        .sum();

    // every (s, t) pair with positive mass contributes its own perturbed point
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for ((i, j), &g) in plan.gamma().indexed_iter() {
        if g > 0.0 {
            let s = &src.support()[i];
            let t = &tgt.support()[j];
            points.push(s.iter().zip(t).map(|(s, t)| s + (t - s)).collect::<Vec<_>>());
            weights.push(g);
        }
    }
    let (xp, yp) = split_joint(&points);
    let fp = params.forward(xp.view())?;
    let perturbed_source_loss: f64 = weights
        .iter()
        .zip(fp.iter().zip(&yp))
        .map(|(w, (f, y))| w * loss.value(*f, *y))
        .sum();

    Ok(CorollaryReport {
        loss,
        cost_exponent: plan.cost_exponent(),
        n_source: src.len(),
        n_target: tgt.len(),
        target_loss,
        perturbed_source_loss,
        gap: (target_loss - perturbed_source_loss).abs(),
    })
}
