//! Synthetic covariate shift by biased sampling along the first principal
//! component of the features.

mod pca;
mod sampling;

pub use pca::{first_pc, PcaProjection};
pub use sampling::{
    biased_sample, gaussian_log_density, sampling_log_weights, weighted_sample_without_replacement,
    ShiftConfig, ShiftOrientation, ShiftedSplit,
};
