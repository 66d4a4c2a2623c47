use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objectives::{ClassificationObjective, DemographicParityObjective, LossVariant};
use super::perturbation::{EpsilonStatus, PNorm, PerturbationConfig};
use super::rfr::{combine, perturb_group};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, GradOrigin, GradientVector, ModelParams, OptimizerState, ScalarObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    #[default]
    Full,
    /// Stratified so every batch holds both sensitive groups.
    Minibatch(usize),
}

/// How `rho` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoScale {
    Absolute,
    /// Fraction of the Euclidean norm of the initial parameters.
    #[default]
    InitNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// One optimizer step on `grad CLF + lambda * (grad DP + grad RFR)`.
    #[default]
    Descend,
    /// Optimizer step on `grad CLF + lambda * grad DP`, then
    /// `theta += lambda * grad RFR` unscaled (the literal printed update).
    Line8Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RfrGradientMode {
    /// `sum_a [grad m_a(theta + eps_a) - grad m_a(theta)]`; zero at `rho = 0`.
    #[default]
    Centered,
    /// `sum_a grad m_a(theta + eps_a)`.
    PerturbedOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
    pub loss: LossVariant,
    pub rho: f64,
    pub rho_scale: RhoScale,
    pub p_norm: PNorm,
    pub optimizer: AdamConfig,
    pub update_rule: UpdateRule,
    pub rfr_gradient: RfrGradientMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epochs: 100,
            batch: BatchMode::Full,
            seed: 0,
            loss: LossVariant::LinearPaper,
            rho: 0.05,
            rho_scale: RhoScale::InitNorm,
            p_norm: PNorm::Finite(2.0),
            optimizer: AdamConfig::default(),
            update_rule: UpdateRule::Descend,
            rfr_gradient: RfrGradientMode::Centered,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if let BatchMode::Minibatch(size) = self.batch {
            if size < 2 {
                return Err(Error::Config("minibatch size must be at least 2".into()));
            }
        }
        if !(self.optimizer.lr > 0.0 && self.optimizer.lr.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        PerturbationConfig::new(self.rho, self.p_norm)?;
        Ok(())
    }

    /// The perturbation ball in absolute units for a given initialization.
    pub fn resolve_perturbation(&self, init: &ModelParams) -> Result<PerturbationConfig> {
        let rho = match self.rho_scale {
            RhoScale::Absolute => self.rho,
            RhoScale::InitNorm => self.rho * init.norm(),
        };
        PerturbationConfig::new(rho, self.p_norm)
    }
}

/// Loss components; `total = clf + lambda * (dp + rfr_s0 + rfr_s1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub clf: f64,
    pub dp: f64,
    pub rfr_s0: f64,
    pub rfr_s1: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(clf: f64, dp: f64, rfr_s0: f64, rfr_s1: f64, lambda: f64) -> Self {
        Self {
            clf,
            dp,
            rfr_s0,
            rfr_s1,
            total: clf + lambda * (dp + rfr_s0 + rfr_s1),
        }
    }

    fn is_finite(&self) -> bool {
        [self.clf, self.dp, self.rfr_s0, self.rfr_s1, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// One entry per epoch, averaged over that epoch's batches, measured
    /// before each update.
    pub trace: Vec<LossBreakdown>,
    pub perturbation: PerturbationConfig,
    /// Number of group perturbations that hit an exactly-zero gradient.
    pub flat_gradient_events: usize,
}

struct Batch {
    x: Array2<f64>,
    y: Vec<u8>,
    a: Vec<u8>,
    groups: [Array2<f64>; 2],
}

impl Batch {
    fn new(data: &Dataset, rows: &[usize]) -> Result<Self> {
        let sub = data.subset(rows);
        let groups = [
            sub.x.select(Axis(0), &sub.nonempty_group_rows(0)?),
            sub.x.select(Axis(0), &sub.nonempty_group_rows(1)?),
        ];
        Ok(Self {
            x: sub.x,
            y: sub.y,
            a: sub.a,
            groups,
        })
    }
}

/// Trains a `[d, hidden.., 1]` network on `data` with the combined
/// classification + demographic parity + robust fairness objective.
///
/// Each step: the gradient of `CLF + lambda * DP`, the worst-case perturbation
/// of each group, the RFR gradient from one extra forward/backward pass per
/// group at the perturbed weights, then one Adam update.
pub fn train(data: &Dataset, hidden: &[usize], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    for label in 0..2u8 {
        if !data.y.contains(&label) {
            return Err(Error::InvalidData(format!("training data has no rows with label {label}")));
        }
    }
    data.nonempty_group_rows(0)?;
    data.nonempty_group_rows(1)?;

    let arch: Vec<usize> = std::iter::once(data.dim())
        .chain(hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let mut params = ModelParams::init(&arch, cfg.seed)?;
    let perturbation = cfg.resolve_perturbation(&params)?;
    let mut opt = OptimizerState::new(&params, cfg.optimizer);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));

    let full_batch = match cfg.batch {
        BatchMode::Full => Some(Batch::new(data, &(0..data.len()).collect::<Vec<_>>())?),
        BatchMode::Minibatch(_) => None,
    };

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut flat_gradient_events = 0;
    for epoch in 0..cfg.epochs {
        let owned;
        let batches: &[Batch] = match (&full_batch, cfg.batch) {
            (Some(b), _) => std::slice::from_ref(b),
            (None, BatchMode::Minibatch(size)) => {
                owned = stratified_batches(data, size, &mut shuffle_rng)?;
                &owned
            }
            (None, BatchMode::Full) => unreachable!(),
        };
        let mut sum = LossBreakdown::default();
        for batch in batches {
            let outcome = step(&params, batch, cfg, &perturbation, &mut opt).map_err(|e| match e {
                Error::NonFinite { origin } => Error::Divergence {
                    epoch,
                    detail: format!("non-finite {origin} gradient"),
                },
                other => other,
            })?;
            if !outcome.breakdown.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: "non-finite loss".into(),
                });
            }
            flat_gradient_events += outcome.flat_events;
            params = outcome.params;
            sum.clf += outcome.breakdown.clf;
            sum.dp += outcome.breakdown.dp;
            sum.rfr_s0 += outcome.breakdown.rfr_s0;
            sum.rfr_s1 += outcome.breakdown.rfr_s1;
        }
        let k = batches.len() as f64;
        trace.push(LossBreakdown::new(
            sum.clf / k,
            sum.dp / k,
            sum.rfr_s0 / k,
            sum.rfr_s1 / k,
            cfg.lambda,
        ));
    }
    Ok(TrainOutcome {
        params,
        trace,
        perturbation,
        flat_gradient_events,
    })
}

struct StepOutcome {
    params: ModelParams,
    breakdown: LossBreakdown,
    flat_events: usize,
}

fn step(
    params: &ModelParams,
    batch: &Batch,
    cfg: &TrainConfig,
    perturbation: &PerturbationConfig,
    opt: &mut OptimizerState,
) -> Result<StepOutcome> {
    let lambda = cfg.lambda;
    let clf_obj = ClassificationObjective {
        labels: &batch.y,
        variant: cfg.loss,
    };
    let dp_obj = DemographicParityObjective { groups: &batch.a };

    // grad CLF + lambda * grad DP through a single backward pass
    let ((clf, dp), base) = params.backward_with(batch.x.view(), |pred| {
        let (clf, mut cot) = clf_obj.value_and_cotangent(pred)?;
        let (dp, dp_cot) = dp_obj.value_and_cotangent(pred)?;
        if !cot.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite {
                origin: GradOrigin::Classification,
            });
        }
        if lambda != 0.0 {
            for (c, d) in cot.iter_mut().zip(&dp_cot) {
                *c += lambda * d;
            }
        }
        Ok(((clf, dp), cot))
    })?;
    let base = GradientVector::new(base, GradOrigin::Combined);
    if !base.is_finite() {
        return Err(Error::NonFinite {
            origin: GradOrigin::Classification,
        });
    }

    let g0 = perturb_group(params, batch.groups[0].view(), 0, perturbation)?;
    let g1 = perturb_group(params, batch.groups[1].view(), 1, perturbation)?;
    let flat_events = [g0.status, g1.status]
        .iter()
        .filter(|&&s| s == EpsilonStatus::FlatGradient)
        .count();
    let breakdown = LossBreakdown::new(clf, dp, g0.rfr_value(), g1.rfr_value(), lambda);

    let next = if lambda == 0.0 {
        opt.adam_step(params, &base)?
    } else {
        let rfr = combine(&g0, &g1, cfg.rfr_gradient == RfrGradientMode::Centered)?;
        match cfg.update_rule {
            UpdateRule::Descend => {
                let mut g = base;
                g.add_scaled(lambda, &rfr);
                opt.adam_step(params, &g)?
            }
            UpdateRule::Line8Literal => {
                let stepped = opt.adam_step(params, &base)?;
                let ascent: Vec<f64> = rfr.values.iter().map(|v| lambda * v).collect();
                stepped.perturb(&ascent)?
            }
        }
    };
    Ok(StepOutcome {
        params: next,
        breakdown,
        flat_events,
    })
}

/// Shuffles each sensitive group separately and deals its rows round-robin
/// into `k` batches, with `k` capped so every batch gets both groups.
fn stratified_batches(data: &Dataset, size: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Batch>> {
    let mut g0 = data.nonempty_group_rows(0)?;
    let mut g1 = data.nonempty_group_rows(1)?;
    g0.shuffle(rng);
    g1.shuffle(rng);
    let k = data.len().div_ceil(size).min(g0.len()).min(g1.len()).max(1);
    let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(size); k];
    for (i, &r) in g0.iter().enumerate() {
        rows[i % k].push(r);
    }
    for (i, &r) in g1.iter().enumerate() {
        rows[i % k].push(r);
    }
    rows.iter().map(|r| Batch::new(data, r)).collect()
}
