use rand::Rng;
use serde::{Deserialize, Serialize};

/// `||a₁ − b₁| − |a₂ − b₂|| ≤ |a₁ − a₂| + |b₁ − b₂|`.
///
/// The inequality is exact over the reals; the comparison allows a few ulps
/// of the operand magnitude so that rounding in the five subtractions cannot
/// report a false violation.
pub fn lemma_d_check(a1: f64, b1: f64, a2: f64, b2: f64) -> bool {
    let lhs = ((a1 - b1).abs() - (a2 - b2).abs()).abs();
    let rhs = (a1 - a2).abs() + (b1 - b2).abs();
    let slack = 8.0 * f64::EPSILON * (a1.abs() + b1.abs() + a2.abs() + b2.abs());
    lhs <= rhs + slack
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub tuples: usize,
    pub range: f64,
    pub violations: usize,
    /// Largest `lhs − rhs` seen; never positive beyond rounding.
    pub worst_excess: f64,
}

/// Random tuples uniform on `[−range, range]⁴`.
pub fn lemma_d_sweep(tuples: usize, range: f64, rng: &mut impl Rng) -> LemmaReport {
    let mut violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..tuples {
        let [a1, b1, a2, b2]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-range..=range));
        if !lemma_d_check(a1, b1, a2, b2) {
            violations += 1;
        }
        let lhs = ((a1 - b1).abs() - (a2 - b2).abs()).abs();
        worst_excess = worst_excess.max(lhs - (a1 - a2).abs() - (b1 - b2).abs());
    }
    LemmaReport {
        tuples,
        range,
        violations,
        worst_excess,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert!(lemma_d_check(1.0, 0.0, 0.0, 1.0));
        assert!(lemma_d_check(5.0, 2.0, 5.0, 2.0));
        let lhs = ((5.0f64 - 2.0).abs() - (5.0f64 - 2.0).abs()).abs();
        assert_eq!(lhs, 0.0);
    }

    proptest! {
        #[test]
        fn always_holds(a1 in -1e6..1e6f64, b1 in -1e6..1e6f64, a2 in -1e6..1e6f64, b2 in -1e6..1e6f64) {
            prop_assert!(lemma_d_check(a1, b1, a2, b2));
        }
    }
}
