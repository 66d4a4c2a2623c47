//! Robust fairness regularization for binary classifiers under
//! distribution shift.
//!
//! The crate covers the training side: a small dense network with exact
//! gradients ([`nn`]), the classification / demographic-parity / robust
//! fairness losses and the training loop ([`losses`]), tabular data loading
//! ([`data`]), and PCA-based biased sampling for synthetic shift ([`shift`]).

pub mod data;
pub mod error;
pub mod losses;
pub mod nn;
pub mod shift;

pub use error::{Error, Result};
