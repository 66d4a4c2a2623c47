use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pca::PcaProjection;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Which side of the split gets the shifted Gaussian `N(mu + alpha, sigma / beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftOrientation {
    /// Target rows weighted by `N(mu, sigma)`, source rows by the shifted
    /// Gaussian.
    #[default]
    ShiftedSource,
    ShiftedTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Defaults to a third of the dataset.
    #[serde(default)]
    pub n_source: Option<usize>,
    #[serde(default)]
    pub n_target: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub orientation: ShiftOrientation,
}

impl ShiftConfig {
    pub fn new(alpha: f64, beta: f64, seed: u64) -> Self {
        Self {
            alpha,
            beta,
            n_source: None,
            n_target: None,
            seed,
            orientation: ShiftOrientation::default(),
        }
    }

    fn counts(&self, n: usize) -> Result<(usize, usize)> {
        if !(self.beta > 0.0 && self.beta.is_finite()) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "shift needs finite alpha and beta > 0, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        let ns = self.n_source.unwrap_or(n / 3);
        let nt = self.n_target.unwrap_or(n / 3);
        if ns + nt > n {
            return Err(Error::Size {
                requested: ns + nt,
                available: n,
            });
        }
        if ns == 0 || nt == 0 {
            return Err(Error::Config("source and target sizes must be positive".into()));
        }
        Ok((ns, nt))
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedSplit {
    pub source: Dataset,
    pub target: Dataset,
    pub source_rows: Vec<usize>,
    pub target_rows: Vec<usize>,
    pub orientation: ShiftOrientation,
}

pub fn gaussian_log_density(z: f64, mean: f64, sd: f64) -> f64 {
    let u = (z - mean) / sd;
    -0.5 * u * u - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Log sampling weights `(target, source)` for every row.
pub fn sampling_log_weights(proj: &PcaProjection, cfg: &ShiftConfig) -> (Vec<f64>, Vec<f64>) {
    let plain: Vec<f64> = proj
        .projections
        .iter()
        .map(|&z| gaussian_log_density(z, proj.mu, proj.sigma))
        .collect();
    let shifted: Vec<f64> = proj
        .projections
        .iter()
        .map(|&z| gaussian_log_density(z, proj.mu + cfg.alpha, proj.sigma / cfg.beta))
        .collect();
    match cfg.orientation {
        ShiftOrientation::ShiftedSource => (plain, shifted),
        ShiftOrientation::ShiftedTarget => (shifted, plain),
    }
}

/// Draws `k` of the `candidates` without replacement with probability
/// proportional to `exp(log_weights[i])`, using exponential keys
/// `E_i / w_i` (smallest `k` win). Keys are compared in log space so tiny
/// weights do not underflow. Returned indices are in selection order.
pub fn weighted_sample_without_replacement(
    candidates: &[usize],
    log_weights: &[f64],
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if k > candidates.len() {
        return Err(Error::Size {
            requested: k,
            available: candidates.len(),
        });
    }
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&i| {
            let u: f64 = rng.random();
            // -ln(U) ~ Exp(1); 1 - u keeps the argument in (0, 1]
            let e = -(1.0 - u).ln();
            (e.ln() - log_weights[i], i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Target rows are drawn first from the whole dataset, source rows from the
/// remainder, so the two never share a row.
pub fn biased_sample(data: &Dataset, proj: &PcaProjection, cfg: &ShiftConfig) -> Result<ShiftedSplit> {
    if proj.projections.len() != data.len() {
        return Err(Error::Shape {
            context: "projection length",
            expected: data.len(),
            actual: proj.projections.len(),
        });
    }
    let (ns, nt) = cfg.counts(data.len())?;
    let (target_w, source_w) = sampling_log_weights(proj, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let all: Vec<usize> = (0..data.len()).collect();
    let target_rows = weighted_sample_without_replacement(&all, &target_w, nt, &mut rng)?;
    let mut taken = vec![false; data.len()];
    for &i in &target_rows {
        taken[i] = true;
    }
    let rest: Vec<usize> = all.into_iter().filter(|&i| !taken[i]).collect();
    let source_rows = weighted_sample_without_replacement(&rest, &source_w, ns, &mut rng)?;
    let mut source = data.subset(&source_rows);
    let mut target = data.subset(&target_rows);
    let tag = format!(
        "biased sample alpha={} beta={} seed={} {:?}",
        cfg.alpha, cfg.beta, cfg.seed, cfg.orientation
    );
    source.provenance = format!("{} / source / {tag}", data.provenance);
    target.provenance = format!("{} / target / {tag}", data.provenance);
    Ok(ShiftedSplit {
        source,
        target,
        source_rows,
        target_rows,
        orientation: cfg.orientation,
    })
}
