//! Classification loss, demographic-parity regularizer and robust fairness
//! regularization (RFR), plus the training loop that combines them.
//!
//! The RFR term for group `a` is the worst-case rise of the group's mean
//! prediction when the weights move inside an `L_p` ball of radius `rho`.
//! The inner maximization is solved in closed form on the linearized
//! objective (see [`dual_norm_epsilon`]).

mod objectives;
mod perturbation;
mod rfr;
mod train;

pub use objectives::{
    clf_loss, dp_loss, group_means, ClassificationObjective, DemographicParityObjective,
    LossVariant,
};
pub use perturbation::{dual_norm_epsilon, DualNormSolution, EpsilonStatus, PNorm, PerturbationConfig};
pub use rfr::{group_mean_gradient, rfr_gradient, rfr_gradient_centered, rfr_terms, RfrTerms};
pub use train::{
    train, BatchMode, LossBreakdown, RfrGradientMode, RhoScale, TrainConfig, TrainOutcome,
    UpdateRule,
};
