use rfr_core::data::Dataset;
use rfr_core::losses::group_means;
use rfr_core::nn::ModelParams;
use rfr_core::Result;
use serde::{Deserialize, Serialize};

/// Absolute slack allowed when comparing the target gap with the bound.
pub const BOUND_TOL: f64 = 1e-12;

/// Soft (mean-prediction) parity gaps on source and target and the
/// per-group source/target discrepancies that bound the target gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub dp_source: f64,
    pub dp_target: f64,
    /// `|E_{S_0} f − E_{T_0} f|`
    pub delta0: f64,
    /// `|E_{S_1} f − E_{T_1} f|`
    pub delta1: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl BoundReport {
    /// From the four group means `[group 0, group 1]` on source and target.
    pub fn from_means(source: [f64; 2], target: [f64; 2]) -> Self {
        let dp_source = (source[0] - source[1]).abs();
        let dp_target = (target[0] - target[1]).abs();
        let delta0 = (source[0] - target[0]).abs();
        let delta1 = (source[1] - target[1]).abs();
        let bound = dp_source + delta0 + delta1;
        Self {
            dp_source,
            dp_target,
            delta0,
            delta1,
            bound,
            satisfied: dp_target <= bound + BOUND_TOL,
        }
    }
}

/// `DP_T ≤ DP_S + Δ₀ + Δ₁` for one model and one source/target pair.
pub fn check_bound(params: &ModelParams, source: &Dataset, target: &Dataset) -> Result<BoundReport> {
    for d in [source, target] {
        d.nonempty_group_rows(0)?;
        d.nonempty_group_rows(1)?;
    }
    Ok(BoundReport::from_means(group_means(params, source)?, group_means(params, target)?))
}
