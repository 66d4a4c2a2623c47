use rfr_core::data::Dataset;
use rfr_core::nn::ModelParams;
use rfr_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default decision threshold on the predicted probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Thresholded group-fairness metrics of a classifier on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    /// `|P(Ŷ=1 | A=0) − P(Ŷ=1 | A=1)|`
    pub delta_dp: f64,
    /// `|P(Ŷ=1 | A=0, Y=1) − P(Ŷ=1 | A=1, Y=1)|`; `None` when a group has no
    /// positive rows.
    pub delta_eo: Option<f64>,
    pub threshold: f64,
    pub n_group: [usize; 2],
    pub positives_group: [usize; 2],
    pub positive_rate_group: [f64; 2],
}

pub fn evaluate(params: &ModelParams, data: &Dataset, threshold: f64) -> Result<FairnessReport> {
    let pred = params.forward(data.features())?;
    evaluate_predictions(pred.as_slice().expect("contiguous predictions"), data, threshold)
}

/// Metrics for precomputed probabilities `pred[i] ≈ P(Y=1 | x_i)`.
pub fn evaluate_predictions(pred: &[f64], data: &Dataset, threshold: f64) -> Result<FairnessReport> {
    if pred.len() != data.len() {
        return Err(Error::Shape {
            context: "predictions",
            expected: data.len(),
            actual: pred.len(),
        });
    }
    if !threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {threshold}")));
    }
    let mut n = [0usize; 2];
    let mut predicted_pos = [0usize; 2];
    let mut label_pos = [0usize; 2];
    let mut true_pos = [0usize; 2];
    let mut correct = 0usize;
    for ((&f, &y), &a) in pred.iter().zip(&data.y).zip(&data.a) {
        let g = a as usize;
        let yhat = f >= threshold;
        n[g] += 1;
        predicted_pos[g] += yhat as usize;
        label_pos[g] += (y == 1) as usize;
        true_pos[g] += (yhat && y == 1) as usize;
        correct += (yhat == (y == 1)) as usize;
    }
    for g in 0..2 {
        if n[g] == 0 {
            return Err(Error::DegenerateGroup { group: g as u8 });
        }
    }
    let rate = [predicted_pos[0] as f64 / n[0] as f64, predicted_pos[1] as f64 / n[1] as f64];
    let delta_eo = (label_pos[0] > 0 && label_pos[1] > 0).then(|| {
        (true_pos[0] as f64 / label_pos[0] as f64 - true_pos[1] as f64 / label_pos[1] as f64).abs()
    });
    Ok(FairnessReport {
        accuracy: correct as f64 / data.len() as f64,
        delta_dp: (rate[0] - rate[1]).abs(),
        delta_eo,
        threshold,
        n_group: n,
        positives_group: label_pos,
        positive_rate_group: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn rows(y: &[u8], a: &[u8]) -> Dataset {
        let n = y.len();
        Dataset::new(Array2::zeros((n, 1)), y.to_vec(), a.to_vec(), vec!["x".into()], "hand").unwrap()
    }

    #[test]
    fn constant_positive_predictor() {
        let d = rows(&[1, 0, 1, 1, 0, 0], &[0, 0, 0, 1, 1, 1]);
        let r = evaluate_predictions(&[1.0; 6], &d, 0.5).unwrap();
        assert_eq!(r.delta_dp, 0.0);
        assert_eq!(r.delta_eo, Some(0.0));
        assert_eq!(r.accuracy, d.positive_rate());
    }

    #[test]
    fn hand_counted_parity_gap() {
        // group 0: 8 of 10 predicted positive; group 1: 3 of 10
        let a: Vec<u8> = [0; 10].into_iter().chain([1; 10]).collect();
        let y = vec![0; 20];
        let pred: Vec<f64> = (0..20).map(|i| if (i < 8) || (10..13).contains(&i) { 0.9 } else { 0.1 }).collect();
        let r = evaluate_predictions(&pred, &rows(&y, &a), 0.5).unwrap();
        assert!((r.delta_dp - 0.5).abs() < 1e-15);
        assert_eq!(r.delta_eo, None);
    }

    #[test]
    fn hand_counted_opportunity_gap() {
        // group 0 positives all caught, half of group 1 positives caught
        let y = [1, 1, 0, 1, 1, 1, 1, 0];
        let a = [0, 0, 0, 1, 1, 1, 1, 1];
        let pred = [0.7, 0.6, 0.2, 0.9, 0.8, 0.1, 0.3, 0.2];
        let r = evaluate_predictions(&pred, &rows(&y, &a), 0.5).unwrap();
        assert_eq!(r.delta_eo, Some(0.5));
    }

    #[test]
    fn threshold_is_inclusive() {
        let d = rows(&[1, 0], &[0, 1]);
        let r = evaluate_predictions(&[0.5, 0.4999], &d, 0.5).unwrap();
        assert_eq!(r.positive_rate_group, [1.0, 0.0]);
    }

    #[test]
    fn empty_group_is_an_error() {
        let d = rows(&[1, 0], &[0, 0]);
        assert!(matches!(evaluate_predictions(&[0.1, 0.9], &d, 0.5), Err(Error::DegenerateGroup { group: 1 })));
    }
}
