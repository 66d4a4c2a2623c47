//! Dense feed-forward network with exact reverse-mode gradients.
//!
//! Hidden layers use a rectifier, the single output unit is logistic so
//! every prediction lies in `(0, 1)`. Parameters can be viewed as one flat
//! vector (per layer: weights row-major, then bias), which is the space the
//! weight perturbations and the optimizer work in.

mod adam;
mod network;
mod params;

pub use adam::{AdamConfig, OptimizerState};
pub use network::{backward_scalar, MeanPrediction, ScalarObjective, WeightedSum};
pub use params::{Layer, ModelParams};

use std::fmt;

use serde::{Deserialize, Serialize};

/// What a flat gradient is the gradient of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradOrigin {
    Classification,
    DemographicParity,
    GroupMean(u8),
    Rfr,
    Combined,
    Custom,
}

impl fmt::Display for GradOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradOrigin::Classification => write!(f, "classification"),
            GradOrigin::DemographicParity => write!(f, "dp"),
            GradOrigin::GroupMean(a) => write!(f, "group-mean({a})"),
            GradOrigin::Rfr => write!(f, "rfr"),
            GradOrigin::Combined => write!(f, "combined"),
            GradOrigin::Custom => write!(f, "custom"),
        }
    }
}

/// Flat gradient with respect to every network parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    pub origin: GradOrigin,
}

impl GradientVector {
    pub fn new(values: Vec<f64>, origin: GradOrigin) -> Self {
        Self { values, origin }
    }

    pub fn zeros(len: usize, origin: GradOrigin) -> Self {
        Self::new(vec![0.0; len], origin)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`, keeping this vector's origin tag.
    pub fn add_scaled(&mut self, scale: f64, other: &GradientVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn with_origin(mut self, origin: GradOrigin) -> Self {
        self.origin = origin;
        self
    }

    pub fn max_abs_diff(&self, other: &GradientVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
