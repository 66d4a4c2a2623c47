use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dist::{ground_cost, DiscreteDistribution};
use crate::{Error, Result};

/// Tolerance on plan marginals.
pub const MARGINAL_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 100_000;

/// Coupling between two discrete distributions under the cost
/// `‖s − t‖₂^cost_exponent`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportPlan {
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    gamma: Array2<f64>,
    cost_exponent: f64,
}

impl TransportPlan {
    /// Checks shape, sign and both marginal constraints.
    pub fn new(
        source: DiscreteDistribution,
        target: DiscreteDistribution,
        gamma: Array2<f64>,
        cost_exponent: f64,
    ) -> Result<Self> {
        check_exponent(cost_exponent)?;
        if source.dim() != target.dim() {
            return Err(Error::Dimension {
                context: "target points",
                expected: source.dim(),
                actual: target.dim(),
            });
        }
        if gamma.dim() != (source.len(), target.len()) {
            return Err(Error::InvalidPlan(format!(
                "gamma is {:?}, supports are {}x{}",
                gamma.dim(),
                source.len(),
                target.len()
            )));
        }
        if let Some(g) = gamma.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidPlan(format!("entry {g}")));
        }
        for (i, row) in gamma.rows().into_iter().enumerate() {
            let gap = (row.sum() - source.mass()[i]).abs();
            if gap > MARGINAL_TOL {
                return Err(Error::InvalidPlan(format!("row {i} off by {gap:e}")));
            }
        }
        for (j, col) in gamma.columns().into_iter().enumerate() {
            let gap = (col.sum() - target.mass()[j]).abs();
            if gap > MARGINAL_TOL {
                return Err(Error::InvalidPlan(format!("column {j} off by {gap:e}")));
            }
        }
        Ok(Self {
            source,
            target,
            gamma,
            cost_exponent,
        })
    }

    /// The product coupling, always feasible.
    pub fn independent(
        source: &DiscreteDistribution,
        target: &DiscreteDistribution,
        cost_exponent: f64,
    ) -> Result<Self> {
        let gamma = Array2::from_shape_fn((source.len(), target.len()), |(i, j)| {
            source.mass()[i] * target.mass()[j]
        });
        Self::new(source.clone(), target.clone(), gamma, cost_exponent)
    }

    pub fn source(&self) -> &DiscreteDistribution {
        &self.source
    }

    pub fn target(&self) -> &DiscreteDistribution {
        &self.target
    }

    pub fn gamma(&self) -> &Array2<f64> {
        &self.gamma
    }

    pub fn cost_exponent(&self) -> f64 {
        self.cost_exponent
    }

    pub fn cost_matrix(&self) -> Array2<f64> {
        cost_matrix(&self.source, &self.target, self.cost_exponent)
    }

    /// Total transport cost `Σ γ(s,t) c(s,t)`.
    pub fn cost(&self) -> f64 {
        (&self.gamma * &self.cost_matrix()).sum()
    }
}

pub fn cost_matrix(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    exponent: f64,
) -> Array2<f64> {
    Array2::from_shape_fn((source.len(), target.len()), |(i, j)| {
        ground_cost(&source.support()[i], &target.support()[j], exponent)
    })
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("cost exponent must be positive, got {p}")))
    }
}

/// Optimal plan together with the dual potentials that certify it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OtSolution {
    pub plan: TransportPlan,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

impl OtSolution {
    /// Largest violation of dual feasibility `u_i + v_j ≤ c_ij`.
    pub fn dual_infeasibility(&self) -> f64 {
        let c = self.plan.cost_matrix();
        let mut worst = 0.0f64;
        for ((i, j), cij) in c.indexed_iter() {
            worst = worst.max(self.row_potentials[i] + self.col_potentials[j] - cij);
        }
        worst
    }

    /// `|primal cost − dual objective|`; zero at an optimum.
    pub fn duality_gap(&self) -> f64 {
        let dual: f64 = self
            .row_potentials
            .iter()
            .zip(self.plan.source().mass())
            .map(|(u, a)| u * a)
            .sum::<f64>()
            + self
                .col_potentials
                .iter()
                .zip(self.plan.target().mass())
                .map(|(v, b)| v * b)
                .sum::<f64>();
        (self.plan.cost() - dual).abs()
    }
}

/// Exact optimal transport between two discrete distributions.
pub fn solve_ot(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    cost_exponent: f64,
) -> Result<TransportPlan> {
    solve_ot_with_duals(source, target, cost_exponent).map(|s| s.plan)
}

pub fn solve_ot_with_duals(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    cost_exponent: f64,
) -> Result<OtSolution> {
    check_exponent(cost_exponent)?;
    if source.dim() != target.dim() {
        return Err(Error::Dimension {
            context: "target points",
            expected: source.dim(),
            actual: target.dim(),
        });
    }
    let cost = cost_matrix(source, target, cost_exponent);
    let (gamma, u, v, pivots) = transportation_simplex(&cost, source.mass(), target.mass())?;
    let plan = TransportPlan::new(source.clone(), target.clone(), gamma, cost_exponent)?;
    Ok(OtSolution {
        plan,
        row_potentials: u,
        col_potentials: v,
        pivots,
    })
}

/// Transportation simplex over an explicit cost matrix.
///
/// The basis is kept as a spanning tree on the bipartite row/column graph
/// (`m + n − 1` cells, degenerate zeros included). Entering and leaving cells
/// follow Bland's smallest-index rule, so degenerate pivots cannot cycle.
/// Returns the plan, row and column potentials, and the pivot count.
pub fn transportation_simplex(
    cost: &Array2<f64>,
    supply: &[f64],
    demand: &[f64],
) -> Result<(Array2<f64>, Vec<f64>, Vec<f64>, usize)> {
    let (m, n) = cost.dim();
    if m != supply.len() || n != demand.len() || m == 0 || n == 0 {
        return Err(Error::InvalidArgument("cost matrix does not match marginals".into()));
    }
    let scale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-12 * scale;

    let mut x = Array2::<f64>::zeros((m, n));
    let mut basic = Array2::from_elem((m, n), false);
    let mut basis = Vec::with_capacity(m + n - 1);

    // north-west corner start; exactly one index advances per cell, so the
    // result is a spanning tree even when supply and demand tie
    let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let q = s[i].min(d[j]);
        x[[i, j]] = q;
        s[i] -= q;
        d[j] -= q;
        basic[[i, j]] = true;
        basis.push((i, j));
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut pivots = 0;
    loop {
        let (u, v) = potentials(cost, &basis, m, n);
        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| !basic[[i, j]] && cost[[i, j]] - u[i] - v[j] < -tol);
        let Some((ei, ej)) = entering else {
            return Ok((x, u, v, pivots));
        };
        if pivots == MAX_PIVOTS {
            return Err(Error::PivotLimit(pivots));
        }
        pivots += 1;

        // tree path row ei -> column ej; with the entering cell it closes the
        // unique cycle, whose cells alternate +, −, +, ... from the entering one
        let path = tree_path(&basis, m, n, ei, m + ej);
        let minus: Vec<(usize, usize)> = path.iter().rev().step_by(2).copied().collect();
        let plus: Vec<(usize, usize)> = path.iter().rev().skip(1).step_by(2).copied().collect();
        let &(li, lj) = minus
            .iter()
            .min_by(|a, b| x[**a].total_cmp(&x[**b]).then((a.0 * n + a.1).cmp(&(b.0 * n + b.1))))
            .expect("cycle has a decreasing cell");
        let theta = x[[li, lj]];
        for &c in &minus {
            x[c] -= theta;
        }
        for &c in &plus {
            x[c] += theta;
        }
        x[[li, lj]] = 0.0;
        x[[ei, ej]] = theta;
        basic[[li, lj]] = false;
        basic[[ei, ej]] = true;
        let slot = basis.iter().position(|&c| c == (li, lj)).expect("leaving cell is basic");
        basis[slot] = (ei, ej);
    }
}

fn adjacency(basis: &[(usize, usize)], m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m + n];
    for &(i, j) in basis {
        adj[i].push(m + j);
        adj[m + j].push(i);
    }
    adj
}

fn potentials(cost: &Array2<f64>, basis: &[(usize, usize)], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let adj = adjacency(basis, m, n);
    let mut pot = vec![f64::NAN; m + n];
    pot[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if pot[b].is_nan() {
                let c = if a < m { cost[[a, b - m]] } else { cost[[b, a - m]] };
                pot[b] = c - pot[a];
                queue.push_back(b);
            }
        }
    }
    let v = pot.split_off(m);
    (pot, v)
}

/// Cells on the tree path between two nodes, in order from `from`.
fn tree_path(basis: &[(usize, usize)], m: usize, n: usize, from: usize, to: usize) -> Vec<(usize, usize)> {
    let adj = adjacency(basis, m, n);
    let mut parent = vec![usize::MAX; m + n];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(a) = queue.pop_front() {
        if a == to {
            break;
        }
        for &b in &adj[a] {
            if parent[b] == usize::MAX {
                parent[b] = a;
                queue.push_back(b);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = to;
    while node != from {
        let p = parent[node];
        cells.push(if p < m { (p, node - m) } else { (node, p - m) });
        node = p;
    }
    cells.reverse();
    cells
}
