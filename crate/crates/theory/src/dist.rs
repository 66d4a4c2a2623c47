use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOL: f64 = 1e-12;

/// Finitely supported probability distribution over points of a common
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    support: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.len() != mass.len() {
            return Err(Error::Dimension {
                context: "mass vector",
                expected: support.len(),
                actual: mass.len(),
            });
        }
        let dim = support[0].len();
        if dim == 0 {
            return Err(Error::InvalidDistribution("zero-dimensional points".into()));
        }
        for p in &support {
            if p.len() != dim {
                return Err(Error::Dimension {
                    context: "support point",
                    expected: dim,
                    actual: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistribution("non-finite support point".into()));
            }
        }
        if let Some(m) = mass.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidDistribution(format!("invalid mass {m}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, not 1"
            )));
        }
        for i in 0..support.len() {
            for j in 0..i {
                if support[i] == support[j] {
                    return Err(Error::InvalidDistribution(format!(
                        "support points {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self { support, mass })
    }

    /// Scalar points with the given masses.
    pub fn scalar(points: &[f64], mass: &[f64]) -> Result<Self> {
        Self::new(points.iter().map(|&p| vec![p]).collect(), mass.to_vec())
    }

    pub fn point_mass(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Equal masses on the given points.
    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len().max(1);
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(p, m)| m * f(p))
            .sum()
    }
}

/// Euclidean distance raised to `exponent`.
pub fn ground_cost(s: &[f64], t: &[f64], exponent: f64) -> f64 {
    let d = s
        .iter()
        .zip(t)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    d.powf(exponent)
}
