use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{GradOrigin, ModelParams, ScalarObjective};

/// Which classification loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossVariant {
    /// `E[-y f - (1 - y)(1 - f)]`, linear in the prediction.
    #[default]
    LinearPaper,
    CrossEntropy,
}

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ClassificationObjective<'a> {
    pub labels: &'a [u8],
    pub variant: LossVariant,
}

impl ScalarObjective for ClassificationObjective<'_> {
    fn origin(&self) -> GradOrigin {
        GradOrigin::Classification
    }

    fn value_and_cotangent(&self, predictions: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = predictions.len();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if self.labels.len() != n {
            return Err(Error::Shape {
                context: "classification labels",
                expected: n,
                actual: self.labels.len(),
            });
        }
        let inv_n = 1.0 / n as f64;
        let mut value = 0.0;
        let mut cot = Vec::with_capacity(n);
        for (&f, &y) in predictions.iter().zip(self.labels) {
            let y = y as f64;
            match self.variant {
                LossVariant::LinearPaper => {
                    value += -y * f - (1.0 - y) * (1.0 - f);
                    cot.push((1.0 - 2.0 * y) * inv_n);
                }
                LossVariant::CrossEntropy => {
                    let f = f.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                    value += -(y * f.ln() + (1.0 - y) * (1.0 - f).ln());
                    cot.push((-y / f + (1.0 - y) / (1.0 - f)) * inv_n);
                }
            }
        }
        Ok((value * inv_n, cot))
    }
}

/// Soft demographic parity `|mean_{a=0} f - mean_{a=1} f|`; the subgradient
/// of `|.|` at zero is taken as zero.
#[derive(Debug, Clone)]
pub struct DemographicParityObjective<'a> {
    pub groups: &'a [u8],
}

impl ScalarObjective for DemographicParityObjective<'_> {
    fn origin(&self) -> GradOrigin {
        GradOrigin::DemographicParity
    }

    fn value_and_cotangent(&self, predictions: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.groups.len() != predictions.len() {
            return Err(Error::Shape {
                context: "sensitive attribute",
                expected: predictions.len(),
                actual: self.groups.len(),
            });
        }
        let [m0, m1] = split_means(predictions, self.groups)?;
        let n0 = self.groups.iter().filter(|&&g| g == 0).count() as f64;
        let n1 = self.groups.len() as f64 - n0;
        let diff = m0 - m1;
        let s = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let cot = self
            .groups
            .iter()
            .map(|&g| if g == 0 { s / n0 } else { -s / n1 })
            .collect();
        Ok((diff.abs(), cot))
    }
}

pub(crate) fn split_means(predictions: &[f64], groups: &[u8]) -> Result<[f64; 2]> {
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (&f, &g) in predictions.iter().zip(groups) {
        sums[g as usize] += f;
        counts[g as usize] += 1;
    }
    for group in 0..2u8 {
        if counts[group as usize] == 0 {
            return Err(Error::DegenerateGroup { group });
        }
    }
    Ok([sums[0] / counts[0] as f64, sums[1] / counts[1] as f64])
}

pub fn clf_loss(params: &ModelParams, data: &Dataset, variant: LossVariant) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let f = params.forward(data.features())?;
    let obj = ClassificationObjective {
        labels: &data.y,
        variant,
    };
    Ok(obj.value_and_cotangent(f.as_slice().expect("contiguous"))?.0)
}

pub fn dp_loss(params: &ModelParams, data: &Dataset) -> Result<f64> {
    let [m0, m1] = group_means(params, data)?;
    Ok((m0 - m1).abs())
}

/// Mean soft prediction over each sensitive group.
pub fn group_means(params: &ModelParams, data: &Dataset) -> Result<[f64; 2]> {
    let f = params.forward(data.features())?;
    split_means(f.as_slice().expect("contiguous"), &data.a)
}
