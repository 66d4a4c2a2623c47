use ndarray::{Array2, ArrayView2, Axis};

use super::perturbation::{dual_norm_epsilon, EpsilonStatus, PerturbationConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{backward_scalar, GradOrigin, GradientVector, MeanPrediction, ModelParams};

/// Mean prediction of a group and its gradient, before and after the
/// worst-case weight perturbation for that group.
#[derive(Debug, Clone)]
pub(crate) struct GroupPerturbation {
    pub mean: f64,
    pub grad: GradientVector,
    pub eps: Vec<f64>,
    pub status: EpsilonStatus,
    pub perturbed_mean: f64,
    pub perturbed_grad: GradientVector,
}

impl GroupPerturbation {
    /// `mean_{S_a} f_{theta + eps*} - mean_{S_a} f_theta`
    pub fn rfr_value(&self) -> f64 {
        self.perturbed_mean - self.mean
    }
}

pub(crate) fn mean_and_gradient(
    params: &ModelParams,
    xg: ArrayView2<f64>,
    group: u8,
) -> Result<(f64, GradientVector)> {
    if xg.nrows() == 0 {
        return Err(Error::DegenerateGroup { group });
    }
    let rows: Vec<usize> = (0..xg.nrows()).collect();
    let obj = MeanPrediction {
        rows: &rows,
        origin: GradOrigin::GroupMean(group),
    };
    backward_scalar(params, &obj, xg)
}

/// One forward/backward pass at `theta` and one at `theta + eps*`.
pub(crate) fn perturb_group(
    params: &ModelParams,
    xg: ArrayView2<f64>,
    group: u8,
    cfg: &PerturbationConfig,
) -> Result<GroupPerturbation> {
    let (mean, grad) = mean_and_gradient(params, xg, group)?;
    let sol = dual_norm_epsilon(&grad.values, cfg);
    let shifted = params.perturb(&sol.eps)?;
    let (perturbed_mean, perturbed_grad) = mean_and_gradient(&shifted, xg, group)?;
    Ok(GroupPerturbation {
        mean,
        grad,
        eps: sol.eps,
        status: sol.status,
        perturbed_mean,
        perturbed_grad,
    })
}

pub(crate) fn group_features(data: &Dataset, group: u8) -> Result<Array2<f64>> {
    let rows = data.nonempty_group_rows(group)?;
    Ok(data.x.select(Axis(0), &rows))
}

fn both_groups(params: &ModelParams, data: &Dataset, cfg: &PerturbationConfig) -> Result<[GroupPerturbation; 2]> {
    let x0 = group_features(data, 0)?;
    let x1 = group_features(data, 1)?;
    Ok([
        perturb_group(params, x0.view(), 0, cfg)?,
        perturb_group(params, x1.view(), 1, cfg)?,
    ])
}

/// Exact gradient of the mean prediction over the rows with `a == group`.
pub fn group_mean_gradient(params: &ModelParams, data: &Dataset, group: u8) -> Result<GradientVector> {
    let xg = group_features(data, group)?;
    Ok(mean_and_gradient(params, xg.view(), group)?.1)
}

#[derive(Debug, Clone)]
pub struct RfrTerms {
    pub rfr_s0: f64,
    pub rfr_s1: f64,
    pub eps0: Vec<f64>,
    pub eps1: Vec<f64>,
    pub status: [EpsilonStatus; 2],
}

/// Robust fairness terms for both sensitive groups on `data`.
pub fn rfr_terms(params: &ModelParams, data: &Dataset, cfg: &PerturbationConfig) -> Result<RfrTerms> {
    let [g0, g1] = both_groups(params, data, cfg)?;
    Ok(RfrTerms {
        rfr_s0: g0.rfr_value(),
        rfr_s1: g1.rfr_value(),
        status: [g0.status, g1.status],
        eps0: g0.eps,
        eps1: g1.eps,
    })
}

/// First-order RFR gradient: each group's mean-prediction gradient taken at
/// its perturbed weights, summed over both groups. The dependence of
/// `eps*` on `theta` (a Hessian term) is dropped.
pub fn rfr_gradient(params: &ModelParams, data: &Dataset, cfg: &PerturbationConfig) -> Result<GradientVector> {
    let [g0, g1] = both_groups(params, data, cfg)?;
    combine(&g0, &g1, false)
}

/// Like [`rfr_gradient`] but with the unperturbed group gradients
/// subtracted, i.e. the gradient of `mean f_{theta+eps} - mean f_theta` with
/// `eps` frozen. Vanishes identically at `rho = 0`.
pub fn rfr_gradient_centered(
    params: &ModelParams,
    data: &Dataset,
    cfg: &PerturbationConfig,
) -> Result<GradientVector> {
    let [g0, g1] = both_groups(params, data, cfg)?;
    combine(&g0, &g1, true)
}

pub(crate) fn combine(g0: &GroupPerturbation, g1: &GroupPerturbation, centered: bool) -> Result<GradientVector> {
    let values = if centered {
        // difference within each group first so rho = 0 gives exact zeros
        g0.perturbed_grad
            .values
            .iter()
            .zip(&g0.grad.values)
            .zip(g1.perturbed_grad.values.iter().zip(&g1.grad.values))
            .map(|((p0, b0), (p1, b1))| (p0 - b0) + (p1 - b1))
            .collect()
    } else {
        g0.perturbed_grad
            .values
            .iter()
            .zip(&g1.perturbed_grad.values)
            .map(|(p0, p1)| p0 + p1)
            .collect()
    };
    let out = GradientVector::new(values, GradOrigin::Rfr);
    if !out.is_finite() {
        return Err(Error::NonFinite { origin: GradOrigin::Rfr });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::perturbation::PNorm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_net(seed: u64) -> ModelParams {
        let p = ModelParams::init(&[2, 5, 4, 1], seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let flat: Vec<f64> = p
            .flatten()
            .into_iter()
            .zip(p.weight_mask())
            .map(|(v, w)| if w { v } else { rng.random_range(-0.5..0.5) })
            .collect();
        p.unflatten(&flat).unwrap()
    }

    fn small_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.5..1.5));
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<u8> = (0..n).map(|i| ((i / 2) % 2) as u8).collect();
        Dataset::new(x, y, a, vec!["u".into(), "v".into()], "test").unwrap()
    }

    fn cfg(rho: f64, p: f64) -> PerturbationConfig {
        PerturbationConfig::new(rho, PNorm::new(p).unwrap()).unwrap()
    }

    fn group_mean(p: &ModelParams, d: &Dataset, a: u8) -> f64 {
        p.forward(d.group(a).x.view()).unwrap().mean().unwrap()
    }

    fn fd<F: Fn(&ModelParams) -> f64>(p: &ModelParams, f: F) -> Vec<f64> {
        let h = 1e-5;
        let base = p.flatten();
        (0..base.len())
            .map(|k| {
                let mut a = base.clone();
                a[k] += h;
                let mut b = base.clone();
                b[k] -= h;
                (f(&p.unflatten(&a).unwrap()) - f(&p.unflatten(&b).unwrap())) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12)
    }

    #[test]
    fn group_mean_gradient_matches_fd() {
        let p = small_net(3);
        let d = small_data(16, 1);
        for a in 0..2 {
            let g = group_mean_gradient(&p, &d, a).unwrap();
            let oracle = fd(&p, |q| group_mean(q, &d, a));
            assert!(rel_err(&g.values, &oracle) <= 1e-4);
        }
    }

    #[test]
    fn group_mean_gradient_invariant_to_duplication() {
        let p = small_net(4);
        let d = small_data(12, 2);
        let doubled: Vec<usize> = (0..d.len()).chain(0..d.len()).collect();
        let d2 = d.subset(&doubled);
        let a = group_mean_gradient(&p, &d, 0).unwrap();
        let b = group_mean_gradient(&p, &d2, 0).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-15);
    }

    #[test]
    fn constant_output_network_has_no_gradient_into_output_weights() {
        let mut p = small_net(5);
        let last = p.layers_mut().last_mut().unwrap();
        last.weights.fill(0.0);
        let d = small_data(10, 3);
        let g = group_mean_gradient(&p, &d, 1).unwrap();
        // every weight except the output layer's feeds through a zero weight;
        // the output weights see non-zero activations but contribute nothing
        // to earlier layers
        let n_out = p.layers().last().unwrap().weights.len();
        let start = p.num_params() - n_out - 1;
        assert!(g.values[..start].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_group_is_degenerate() {
        let p = small_net(1);
        let d = small_data(10, 3);
        let only0 = d.group(0);
        assert!(matches!(
            group_mean_gradient(&p, &only0, 1),
            Err(Error::DegenerateGroup { group: 1 })
        ));
        assert!(rfr_terms(&p, &only0, &cfg(0.1, 2.0)).is_err());
    }

    #[test]
    fn zero_radius_terms_vanish_and_gradient_collapses() {
        let p = small_net(6);
        let d = small_data(20, 4);
        let t = rfr_terms(&p, &d, &cfg(0.0, 2.0)).unwrap();
        assert_eq!((t.rfr_s0, t.rfr_s1), (0.0, 0.0));
        let g = rfr_gradient(&p, &d, &cfg(0.0, 2.0)).unwrap();
        let mut expected = group_mean_gradient(&p, &d, 0).unwrap();
        expected.add_scaled(1.0, &group_mean_gradient(&p, &d, 1).unwrap());
        assert_eq!(g.values, expected.values);
        let c = rfr_gradient_centered(&p, &d, &cfg(0.0, 2.0)).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_radius_is_first_order() {
        let p = small_net(7);
        let d = small_data(20, 5);
        let rho = 1e-4;
        let t = rfr_terms(&p, &d, &cfg(rho, 2.0)).unwrap();
        for (a, value) in [(0u8, t.rfr_s0), (1, t.rfr_s1)] {
            let g = group_mean_gradient(&p, &d, a).unwrap();
            let predicted = rho * g.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((value - predicted).abs() <= 0.05 * predicted, "{value} vs {predicted}");
        }
    }

    #[test]
    fn radius_continuity() {
        let p = small_net(8);
        let d = small_data(20, 6);
        let g0 = rfr_gradient(&p, &d, &cfg(0.0, 2.0)).unwrap();
        let g1 = rfr_gradient(&p, &d, &cfg(1e-8, 2.0)).unwrap();
        assert!(g0.max_abs_diff(&g1) <= 1e-5);
    }

    #[test]
    fn gradient_matches_fd_of_frozen_surrogate() {
        let p = small_net(9);
        let d = small_data(20, 7);
        let c = cfg(0.05, 2.0);
        let t = rfr_terms(&p, &d, &c).unwrap();
        let g = rfr_gradient(&p, &d, &c).unwrap();
        let surrogate = |q: &ModelParams| {
            group_mean(&q.perturb(&t.eps0).unwrap(), &d, 0) + group_mean(&q.perturb(&t.eps1).unwrap(), &d, 1)
        };
        assert!(rel_err(&g.values, &fd(&p, surrogate)) <= 1e-4);
        let centered = rfr_gradient_centered(&p, &d, &c).unwrap();
        let centered_surrogate = |q: &ModelParams| surrogate(q) - group_mean(q, &d, 0) - group_mean(q, &d, 1);
        assert!(rel_err(&centered.values, &fd(&p, centered_surrogate)) <= 1e-4);
    }

    #[test]
    fn terms_against_random_search() {
        let d = small_data(20, 8);
        for (seed, rho) in [(10u64, 1e-3), (11, 1e-2)] {
            let p = small_net(seed);
            let t = rfr_terms(&p, &d, &cfg(rho, 2.0)).unwrap();
            let n = p.num_params();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = [group_mean(&p, &d, 0), group_mean(&p, &d, 1)];
            let mut best = [f64::NEG_INFINITY; 2];
            for _ in 0..10_000 {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let eps: Vec<f64> = v.iter().map(|x| x * rho / norm).collect();
                let q = p.perturb(&eps).unwrap();
                for a in 0..2u8 {
                    best[a as usize] = best[a as usize].max(group_mean(&q, &d, a) - base[a as usize]);
                }
            }
            for (value, b) in [(t.rfr_s0, best[0]), (t.rfr_s1, best[1])] {
                assert!(value >= -1e-9);
                assert!(value >= b - 1e-3);
                // the search cannot beat the linearized optimum by more than
                // the curvature of the ball at this radius
                assert!(b <= value + 1e-6, "search {b} beat closed form {value}");
            }
        }
    }
}
