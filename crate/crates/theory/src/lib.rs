//! Exact discrete optimal transport and numerical certificates for the link
//! between distribution shift, data perturbation and weight perturbation.
//!
//! Distributions are finite. The joint `(x, y)` checks store the label as the
//! last coordinate of each support point.

pub mod corollary;
pub mod dist;
pub mod error;
pub mod law;
pub mod lemma;
pub mod loss;
pub mod ot;
pub mod plans;
pub mod suite;
pub mod theorem2;

pub use corollary::{check_corollary1, check_corollary1_with_plan, CorollaryReport};
pub use dist::DiscreteDistribution;
pub use error::{Error, Result};
pub use law::{perturbation_law, pushforward_error, PerturbationLaw};
pub use lemma::{lemma_d_check, lemma_d_sweep, LemmaReport};
pub use loss::PointLoss;
pub use ot::{solve_ot, solve_ot_with_duals, OtSolution, TransportPlan};
pub use plans::random_feasible_plans;
pub use suite::{verify_theory, CheckSummary, SuiteConfig, TheoryReport};
pub use theorem2::{
    check_theorem2, check_theorem2_coupled, halving_scales, Coupling, LabelChannel, Theorem2Report,
    Theorem2Status,
};
