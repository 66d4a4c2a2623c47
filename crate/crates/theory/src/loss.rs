use serde::{Deserialize, Serialize};

/// Pointwise loss `l(f, y)` with the label embedded in ℝ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointLoss {
    /// `(f − y)²`
    SquaredError,
    /// `−y f − (1 − y)(1 − f)`
    LinearPaper,
    /// `−y ln f − (1 − y) ln(1 − f)`, with `f` clamped away from 0 and 1
    CrossEntropy,
}

const CLAMP: f64 = 1e-12;

impl PointLoss {
    pub const ALL: [PointLoss; 3] = [
        PointLoss::SquaredError,
        PointLoss::LinearPaper,
        PointLoss::CrossEntropy,
    ];

    pub fn value(self, f: f64, y: f64) -> f64 {
        match self {
            PointLoss::SquaredError => (f - y) * (f - y),
            PointLoss::LinearPaper => -y * f - (1.0 - y) * (1.0 - f),
            PointLoss::CrossEntropy => {
                let f = f.clamp(CLAMP, 1.0 - CLAMP);
                -y * f.ln() - (1.0 - y) * (1.0 - f).ln()
            }
        }
    }

    /// `∂l/∂f`
    pub fn d_pred(self, f: f64, y: f64) -> f64 {
        match self {
            PointLoss::SquaredError => 2.0 * (f - y),
            PointLoss::LinearPaper => 1.0 - 2.0 * y,
            PointLoss::CrossEntropy => {
                let f = f.clamp(CLAMP, 1.0 - CLAMP);
                -y / f + (1.0 - y) / (1.0 - f)
            }
        }
    }

    /// `∂l/∂y`
    pub fn d_label(self, f: f64, y: f64) -> f64 {
        match self {
            PointLoss::SquaredError => -2.0 * (f - y),
            PointLoss::LinearPaper => 1.0 - 2.0 * f,
            PointLoss::CrossEntropy => {
                let f = f.clamp(CLAMP, 1.0 - CLAMP);
                (1.0 - f).ln() - f.ln()
            }
        }
    }
}
