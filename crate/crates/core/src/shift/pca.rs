use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ANGLE_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Unit-norm leading eigenvector of the feature covariance.
    pub direction: Vec<f64>,
    /// `x_i . direction` for every row.
    pub projections: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub eigenvalue: f64,
    pub iterations: usize,
}

fn covariance(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    centered.t().dot(&centered) / n
}

fn normalize(v: &mut Array1<f64>) -> f64 {
    let norm = v.dot(v).sqrt();
    if norm > 0.0 {
        v.mapv_inplace(|x| x / norm);
    }
    norm
}

/// Leading principal direction by power iteration on the covariance matrix.
///
/// Iterates until successive unit estimates differ in angle by at most
/// `1e-10`; the sign is fixed so the largest-magnitude coordinate is positive.
pub fn first_pc(x: ArrayView2<f64>) -> Result<PcaProjection> {
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(Error::InvalidData(format!(
            "PCA needs at least 2 rows and 1 column, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let cov = covariance(x);
    let trace: f64 = cov.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    // start from the covariance column with the largest norm; it has a
    // non-zero component along the top eigenvector unless that column is zero
    let start = (0..cov.ncols())
        .max_by(|&a, &b| {
            let na = cov.column(a).dot(&cov.column(a));
            let nb = cov.column(b).dot(&cov.column(b));
            na.total_cmp(&nb)
        })
        .expect("at least one column");
    let mut v = cov.column(start).to_owned();
    normalize(&mut v);

    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = cov.dot(&v);
        if normalize(&mut next) == 0.0 {
            return Err(Error::DegenerateVariance);
        }
        let cos = next.dot(&v).abs().min(1.0);
        // sin of the angle, accurate for tiny angles where acos is not
        let angle = (1.0 - cos * cos).max(0.0).sqrt();
        v = next;
        if angle <= ANGLE_TOL || iterations >= MAX_ITERS {
            break;
        }
    }

    let pivot = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    if v[pivot] < 0.0 {
        v.mapv_inplace(|c| -c);
    }
    let eigenvalue = v.dot(&cov.dot(&v));
    let projections: Vec<f64> = x.dot(&v).to_vec();
    let n = projections.len() as f64;
    let mu = projections.iter().sum::<f64>() / n;
    let sigma = (projections.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / n).sqrt();
    if !(sigma > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(PcaProjection {
        direction: v.to_vec(),
        projections,
        mu,
        sigma,
        eigenvalue,
        iterations,
    })
}
