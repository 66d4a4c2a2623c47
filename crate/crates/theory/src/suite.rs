//! Randomized certification runs over generated discrete instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfr_core::nn::ModelParams;
use serde::{Deserialize, Serialize};

use crate::corollary::{check_corollary1, CorollaryReport};
use crate::law::{perturbation_law, pushforward_error};
use crate::lemma::{lemma_d_sweep, LemmaReport};
use crate::loss::PointLoss;
use crate::ot::{solve_ot, solve_ot_with_duals, MARGINAL_TOL};
use crate::plans::random_feasible_plans;
use crate::theorem2::{
    check_theorem2, check_theorem2_coupled, halving_scales, Coupling, LabelChannel, Theorem2Report, Theorem2Status,
};
use crate::{DiscreteDistribution, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub ot_instances: usize,
    pub corollary_instances: usize,
    pub theorem2_instances: usize,
    pub minimal_power_instances: usize,
    pub alternative_plans: usize,
    pub lemma_tuples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ot_instances: 30,
            corollary_instances: 20,
            theorem2_instances: 10,
            minimal_power_instances: 10,
            alternative_plans: 1000,
            lemma_tuples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OtCertificate {
    pub label: String,
    pub source_size: usize,
    pub target_size: usize,
    pub cost_exponent: f64,
    pub cost: f64,
    pub pivots: usize,
    pub duality_gap: f64,
    pub dual_infeasibility: f64,
    pub pushforward_error: f64,
    /// `|E[‖δ‖^p̃] − cost|` with both sides computed separately.
    pub law_moment_gap: f64,
}

impl OtCertificate {
    pub fn passed(&self) -> bool {
        let scale = self.cost.abs().max(1.0);
        self.duality_gap <= 1e-9 * scale
            && self.dual_infeasibility <= 1e-9 * scale
            && self.pushforward_error <= MARGINAL_TOL
            && self.law_moment_gap <= 1e-12 * scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalPowerReport {
    pub source_size: usize,
    pub target_size: usize,
    pub cost_exponent: f64,
    pub optimal_moment: f64,
    pub best_alternative_moment: f64,
    pub alternatives: usize,
    pub beaten_by: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckSummary>,
    pub optimal_transport: Vec<OtCertificate>,
    pub corollary: Vec<CorollaryReport>,
    pub theorem2: Vec<Theorem2Report>,
    pub minimal_power: Vec<MinimalPowerReport>,
    pub lemma: LemmaReport,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_mass(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn random_distribution(n: usize, dim: usize, spread: f64, rng: &mut impl Rng) -> Result<DiscreteDistribution> {
    let support = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-spread..spread)).collect())
        .collect();
    DiscreteDistribution::new(support, random_mass(n, rng))
}

/// Joint points: features in `[−1, 1]^d`, binary label last.
fn random_joint(n: usize, d: usize, rng: &mut impl Rng) -> Result<DiscreteDistribution> {
    let support = (0..n)
        .map(|_| {
            let mut p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            p.push(f64::from(rng.random_range(0..2u8)));
            p
        })
        .collect();
    DiscreteDistribution::new(support, random_mass(n, rng))
}

/// Glorot weights with nonzero biases so no sample sits on a ReLU kink.
pub fn random_net(arch: &[usize], rng: &mut impl Rng) -> Result<ModelParams> {
    let p = ModelParams::init(arch, rng.random())?;
    let flat: Vec<f64> = p
        .flatten()
        .into_iter()
        .zip(p.weight_mask())
        .map(|(v, w)| if w { v } else { rng.random_range(-0.5..0.5) })
        .collect();
    Ok(p.unflatten(&flat)?)
}

fn certify(label: String, src: &DiscreteDistribution, tgt: &DiscreteDistribution, p: f64) -> Result<OtCertificate> {
    let sol = solve_ot_with_duals(src, tgt, p)?;
    let law = perturbation_law(&sol.plan);
    Ok(OtCertificate {
        label,
        source_size: src.len(),
        target_size: tgt.len(),
        cost_exponent: p,
        cost: sol.plan.cost(),
        pivots: sol.pivots,
        duality_gap: sol.duality_gap(),
        dual_infeasibility: sol.dual_infeasibility(),
        pushforward_error: pushforward_error(&sol.plan),
        law_moment_gap: (law.power_moment(p) - sol.plan.cost()).abs(),
    })
}

/// Bundled examples followed by random instances up to 12×12.
pub fn ot_suite(instances: usize, rng: &mut impl Rng) -> Result<Vec<OtCertificate>> {
    let s = DiscreteDistribution::scalar;
    let mut out = vec![
        certify("point masses 0 -> 1".into(), &s(&[0.0], &[1.0])?, &s(&[1.0], &[1.0])?, 1.0)?,
        certify("identical".into(), &s(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3])?, &s(&[0.0, 1.0, 3.0], &[0.2, 0.5, 0.3])?, 2.0)?,
        certify("two-point shift".into(), &s(&[0.0, 1.0], &[0.5, 0.5])?, &s(&[1.0, 2.0], &[0.5, 0.5])?, 2.0)?,
    ];
    for k in 0..instances {
        let (m, n) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let dim = rng.random_range(1..=3);
        let p = [1.0, 1.5, 2.0, 3.0][k % 4];
        let src = random_distribution(m, dim, 2.0, rng)?;
        let tgt = random_distribution(n, dim, 2.0, rng)?;
        out.push(certify(format!("random {m}x{n} in R^{dim}"), &src, &tgt, p)?);
    }
    Ok(out)
}

pub fn corollary_suite(instances: usize, rng: &mut impl Rng) -> Result<Vec<CorollaryReport>> {
    let mut out = Vec::with_capacity(instances);
    for k in 0..instances {
        let d = rng.random_range(1..=3);
        let net = random_net(&[d, 5, 4, 1], rng)?;
        let src = random_joint(rng.random_range(1..=6), d, rng)?;
        let tgt = random_joint(rng.random_range(1..=6), d, rng)?;
        out.push(check_corollary1(&net, &src, &tgt, PointLoss::ALL[k % 3], 2.0)?);
    }
    Ok(out)
}

/// Shifted copies of random joint sources: features and the real-valued
/// label move by up to 0.02, small enough that no ReLU kink is crossed in
/// typical instances (a crossing adds a first-order term). Alternates between the product
/// coupling of source and extracted law, and the plan's own coupling.
pub fn theorem2_suite(instances: usize, rng: &mut impl Rng) -> Result<Vec<Theorem2Report>> {
    let mut out = Vec::with_capacity(instances);
    for k in 0..instances {
        let d = rng.random_range(1..=3);
        let net = random_net(&[d, 6, 1], rng)?;
        let src = random_joint(rng.random_range(2..=5), d, rng)?;
        let shifted = src
            .support()
            .iter()
            .map(|p| p.iter().map(|v| v + rng.random_range(-0.02..0.02)).collect())
            .collect();
        let tgt = DiscreteDistribution::new(shifted, src.mass().to_vec())?;
        let plan = solve_ot(&src, &tgt, 2.0)?;
        let loss = PointLoss::ALL[k % 3];
        let report = if k % 2 == 0 {
            check_theorem2(&net, &src, &perturbation_law(&plan), loss, LabelChannel::LossLabelDerivative, &halving_scales())?
        } else {
            check_theorem2_coupled(&net, &Coupling::from_plan(&plan), loss, LabelChannel::LossLabelDerivative, &halving_scales())?
        };
        out.push(report);
    }
    Ok(out)
}

pub fn minimal_power_suite(
    instances: usize,
    alternatives: usize,
    rng: &mut impl Rng,
) -> Result<Vec<MinimalPowerReport>> {
    let mut out = Vec::with_capacity(instances);
    for k in 0..instances {
        let (m, n) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let dim = rng.random_range(1..=2);
        let p = [2.0, 1.0][k % 2];
        let src = random_distribution(m, dim, 2.0, rng)?;
        let tgt = random_distribution(n, dim, 2.0, rng)?;
        let optimal = perturbation_law(&solve_ot(&src, &tgt, p)?).power_moment(p);
        let moments: Vec<f64> = random_feasible_plans(&src, &tgt, p, alternatives, rng)?
            .iter()
            .map(|plan| perturbation_law(plan).power_moment(p))
            .collect();
        out.push(MinimalPowerReport {
            source_size: m,
            target_size: n,
            cost_exponent: p,
            optimal_moment: optimal,
            best_alternative_moment: moments.iter().copied().fold(f64::INFINITY, f64::min),
            alternatives: moments.len(),
            beaten_by: moments.iter().filter(|&&a| a < optimal - 1e-12 * optimal.max(1.0)).count(),
        });
    }
    Ok(out)
}

/// Runs every certification with one seeded stream per check.
pub fn verify_theory(cfg: &SuiteConfig) -> Result<TheoryReport> {
    let rng = |salt: u64| ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let ot = ot_suite(cfg.ot_instances, &mut rng(1))?;
    let corollary = corollary_suite(cfg.corollary_instances, &mut rng(2))?;
    let theorem2 = theorem2_suite(cfg.theorem2_instances, &mut rng(3))?;
    let minimal_power = minimal_power_suite(cfg.minimal_power_instances, cfg.alternative_plans, &mut rng(4))?;
    let lemma = lemma_d_sweep(cfg.lemma_tuples, 10.0, &mut rng(5));

    let worst = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let checks = vec![
        CheckSummary {
            name: "optimal transport certified by duality".into(),
            passed: ot.iter().all(OtCertificate::passed),
            instances: ot.len(),
            detail: format!(
                "max duality gap {:.2e}, max pushforward error {:.2e}",
                worst(&mut ot.iter().map(|c| c.duality_gap)),
                worst(&mut ot.iter().map(|c| c.pushforward_error))
            ),
        },
        CheckSummary {
            name: "target risk equals perturbed source risk".into(),
            passed: corollary.iter().all(|r| r.gap <= 1e-10),
            instances: corollary.len(),
            detail: format!("max gap {:.2e}", worst(&mut corollary.iter().map(|r| r.gap))),
        },
        CheckSummary {
            name: "weight perturbation matches data perturbation to first order".into(),
            passed: theorem2
                .iter()
                .all(|r| r.status != Theorem2Status::Unrepresentable && r.decays_quadratically),
            instances: theorem2.len(),
            detail: format!("max halving ratio {:.3}", worst(&mut theorem2.iter().flat_map(|r| r.ratios.clone()))),
        },
        CheckSummary {
            name: "optimal plan has minimal perturbation power".into(),
            passed: minimal_power.iter().all(|r| r.beaten_by == 0),
            instances: minimal_power.len(),
            detail: format!(
                "{} alternative plans per instance",
                minimal_power.first().map_or(0, |r| r.alternatives)
            ),
        },
        CheckSummary {
            name: "scalar triangle lemma".into(),
            passed: lemma.violations == 0,
            instances: lemma.tuples,
            detail: format!("{} violations, worst excess {:.2e}", lemma.violations, lemma.worst_excess),
        },
    ];
    Ok(TheoryReport {
        config: cfg.clone(),
        checks,
        optimal_transport: ot,
        corollary,
        theorem2,
        minimal_power,
        lemma,
    })
}
