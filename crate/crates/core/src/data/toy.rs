use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Feature distribution and labelling rule for one sensitive group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub mean: Vec<f64>,
    /// Full covariance matrix, row-major `d x d`.
    pub cov: Vec<Vec<f64>>,
    /// `P(y = 1 | x) = sigmoid((w . x + b) / temperature)`; a temperature of
    /// zero makes the rule deterministic.
    pub label_weights: Vec<f64>,
    pub label_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub groups: [GroupSpec; 2],
    /// Probability that a row belongs to group 1.
    pub group1_fraction: f64,
    pub label_temperature: f64,
}

impl ToySpec {
    pub fn dim(&self) -> usize {
        self.groups[0].mean.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Config("toy features need at least one dimension".into()));
        }
        for g in &self.groups {
            if g.mean.len() != d || g.label_weights.len() != d || g.cov.len() != d || g.cov.iter().any(|r| r.len() != d) {
                return Err(Error::Config("toy group dimensions disagree".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.group1_fraction) {
            return Err(Error::Config("group1_fraction must lie in [0, 1]".into()));
        }
        if !(self.label_temperature >= 0.0) {
            return Err(Error::Config("label_temperature must be >= 0".into()));
        }
        Ok(())
    }
}

/// Lower-triangular `L` with `L L^T = cov`.
fn cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = cov[i][i] - s;
                if v < 0.0 {
                    return Err(Error::Config("covariance is not positive semi-definite".into()));
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { (cov[i][j] - s) / l[j][j] } else { 0.0 };
            }
        }
    }
    Ok(l)
}

/// Seeded Gaussian-mixture dataset with group-dependent labels.
pub fn make_toy(spec: &ToySpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("toy dataset size must be positive".into()));
    }
    spec.validate()?;
    let d = spec.dim();
    let chol = [cholesky(&spec.groups[0].cov)?, cholesky(&spec.groups[1].cov)?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for i in 0..n {
        let group = (rng.random::<f64>() < spec.group1_fraction) as u8;
        let g = &spec.groups[group as usize];
        let l = &chol[group as usize];
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for r in 0..d {
            let noise: f64 = (0..=r).map(|k| l[r][k] * z[k]).sum();
            x[[i, r]] = g.mean[r] + noise;
        }
        let score: f64 = g.label_bias + (0..d).map(|r| g.label_weights[r] * x[[i, r]]).sum::<f64>();
        let u: f64 = rng.random();
        let label = if spec.label_temperature == 0.0 {
            score > 0.0
        } else {
            u < 1.0 / (1.0 + (-score / spec.label_temperature).exp())
        };
        y.push(label as u8);
        a.push(group);
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, a, names, format!("toy(n={n}, seed={seed})"))
}
