//! Optimal-transport optimality against two independent oracles: exhaustive
//! enumeration of basic feasible plans on tiny supports, and a generic LP
//! solver on larger ones.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfr_theory::ot::cost_matrix;
use rfr_theory::{perturbation_law, pushforward_error, solve_ot, DiscreteDistribution};

fn random_dist(n: usize, dim: usize, rng: &mut impl Rng) -> DiscreteDistribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let support = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    DiscreteDistribution::new(support, raw.iter().map(|v| v / total).collect()).unwrap()
}

/// Solves for the plan supported on `cells` by peeling leaves; `None` when the
/// cells do not form a spanning tree or the solution is negative.
fn basic_solution(cells: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Array2<f64>> {
    let (m, n) = (a.len(), b.len());
    let mut x = Array2::zeros((m, n));
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let mut live: Vec<(usize, usize)> = cells.to_vec();
    while !live.is_empty() {
        let leaf = live.iter().enumerate().find_map(|(k, &(i, j))| {
            if live.iter().filter(|c| c.0 == i).count() == 1 {
                Some((k, true))
            } else if live.iter().filter(|c| c.1 == j).count() == 1 {
                Some((k, false))
            } else {
                None
            }
        });
        let (k, by_row) = leaf?;
        let (i, j) = live.swap_remove(k);
        let q = if by_row { ra[i] } else { rb[j] };
        if q < -1e-12 {
            return None;
        }
        x[[i, j]] = q;
        ra[i] -= q;
        rb[j] -= q;
    }
    let ok = ra.iter().chain(&rb).all(|r| r.abs() < 1e-9);
    ok.then_some(x)
}

fn enumerate_optimum(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = cost.dim();
    let k = m + n - 1;
    let all: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    // all k-subsets of the m*n cells
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let cells: Vec<_> = idx.iter().map(|&t| all[t]).collect();
        if let Some(x) = basic_solution(&cells, a, b) {
            best = best.min((&x * cost).sum());
        }
        let mut p = k;
        while p > 0 && idx[p - 1] == all.len() - k + p - 1 {
            p -= 1;
        }
        if p == 0 {
            return best;
        }
        idx[p - 1] += 1;
        for q in p..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn lp_optimum(cost: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = cost.dim();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = (0..m)
        .map(|i| (0..n).map(|j| lp.add_var(cost[[i, j]], (0.0, f64::INFINITY))).collect())
        .collect();
    for i in 0..m {
        let row: Vec<_> = (0..n).map(|j| (vars[i][j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, a[i]);
    }
    // the last column constraint is implied by the others
    for j in 0..n - 1 {
        let col: Vec<_> = (0..m).map(|i| (vars[i][j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, b[j]);
    }
    lp.solve().expect("transport LP is feasible").objective()
}

#[test]
fn matches_vertex_enumeration_up_to_4x4() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let p = [1.0, 2.0, 0.5][trial % 3];
        let src = random_dist(m, rng.random_range(1..=2), &mut rng);
        let tgt = random_dist(n, src.dim(), &mut rng);
        let plan = solve_ot(&src, &tgt, p).unwrap();
        let oracle = enumerate_optimum(&cost_matrix(&src, &tgt, p), src.mass(), tgt.mass());
        assert!(
            (plan.cost() - oracle).abs() <= 1e-12 * oracle.max(1.0),
            "{m}x{n} p={p}: {} vs {oracle}",
            plan.cost()
        );
    }
}

#[test]
fn matches_lp_solver_up_to_40x40() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &(m, n) in &[(5, 7), (12, 9), (20, 20), (33, 17), (40, 40)] {
        for p in [1.0, 2.0] {
            let src = random_dist(m, 2, &mut rng);
            let tgt = random_dist(n, 2, &mut rng);
            let plan = solve_ot(&src, &tgt, p).unwrap();
            let oracle = lp_optimum(&cost_matrix(&src, &tgt, p), src.mass(), tgt.mass());
            assert!(
                (plan.cost() - oracle).abs() <= 1e-8 * oracle.max(1.0),
                "{m}x{n} p={p}: {} vs {oracle}",
                plan.cost()
            );
        }
    }
}

#[test]
fn degenerate_marginals_do_not_cycle() {
    // equal masses everywhere make every north-west step tie
    let pts: Vec<f64> = (0..10).map(f64::from).collect();
    let rev: Vec<f64> = pts.iter().rev().map(|v| v + 0.5).collect();
    let mass = vec![0.1; 10];
    let src = DiscreteDistribution::scalar(&pts, &mass).unwrap();
    let tgt = DiscreteDistribution::scalar(&rev, &mass).unwrap();
    let plan = solve_ot(&src, &tgt, 2.0).unwrap();
    assert!((plan.cost() - 0.25).abs() < 1e-12);
}

#[test]
fn one_dimensional_convex_cost_is_monotone() {
    // for convex costs on the line the sorted (quantile) coupling is optimal
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let n = rng.random_range(2..8);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mass = vec![1.0 / n as f64; n];
        let plan = solve_ot(
            &DiscreteDistribution::scalar(&xs, &mass).unwrap(),
            &DiscreteDistribution::scalar(&ys, &mass).unwrap(),
            2.0,
        )
        .unwrap();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let sorted: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64;
        assert!((plan.cost() - sorted).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn plans_are_feasible_and_push_forward(seed in 0u64..10_000, m in 1usize..9, n in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_dist(m, 2, &mut rng);
        let tgt = random_dist(n, 2, &mut rng);
        let plan = solve_ot(&src, &tgt, 2.0).unwrap();
        for (i, row) in plan.gamma().rows().into_iter().enumerate() {
            prop_assert!((row.sum() - src.mass()[i]).abs() <= 1e-9);
        }
        for (j, col) in plan.gamma().columns().into_iter().enumerate() {
            prop_assert!((col.sum() - tgt.mass()[j]).abs() <= 1e-9);
        }
        prop_assert!(plan.gamma().iter().all(|g| *g >= 0.0));
        prop_assert!(pushforward_error(&plan) <= 1e-9);
        let law = perturbation_law(&plan);
        prop_assert!((law.mass().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!((law.power_moment(2.0) - plan.cost()).abs() <= 1e-12 * plan.cost().max(1.0));
    }
}
