use ndarray::Array2;
use rand::Rng;

use crate::ot::{transportation_simplex, TransportPlan};
use crate::{DiscreteDistribution, Result};

/// Random feasible couplings of `source` and `target`: alternately
/// Sinkhorn-balanced random positive matrices and random convex combinations
/// of vertex plans (optimal plans for random cost matrices).
pub fn random_feasible_plans(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    cost_exponent: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<TransportPlan>> {
    let (m, n) = (source.len(), target.len());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let gamma = if out.len() % 2 == 0 {
            let kernel = Array2::from_shape_fn((m, n), |_| rng.random::<f64>().powi(3) + 1e-6);
            sinkhorn_balance(kernel, source.mass(), target.mass())
        } else {
            let k = rng.random_range(1..=3);
            let weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = weights.iter().sum();
            let mut acc = Array2::<f64>::zeros((m, n));
            for w in weights {
                let cost = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
                let (vertex, ..) = transportation_simplex(&cost, source.mass(), target.mass())?;
                acc.scaled_add(w / total, &vertex);
            }
            acc
        };
        // balancing can stall short of the marginal tolerance; skip those draws
        if let Ok(plan) = TransportPlan::new(source.clone(), target.clone(), gamma, cost_exponent) {
            out.push(plan);
        }
    }
    Ok(out)
}

fn sinkhorn_balance(mut k: Array2<f64>, rows: &[f64], cols: &[f64]) -> Array2<f64> {
    for _ in 0..2000 {
        for (mut row, r) in k.rows_mut().into_iter().zip(rows) {
            let s = row.sum();
            row.mapv_inplace(|v| if s > 0.0 { v * r / s } else { 0.0 });
        }
        let mut worst = 0.0f64;
        for (mut col, c) in k.columns_mut().into_iter().zip(cols) {
            let s = col.sum();
            worst = worst.max((s - c).abs());
            col.mapv_inplace(|v| if s > 0.0 { v * c / s } else { 0.0 });
        }
        if worst < 1e-13 {
            break;
        }
    }
    k
}
