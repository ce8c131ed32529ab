//! Differentially private federated k-means.
//!
//! The pipeline runs a three-round private initialization (private projector,
//! noisy proxy weights, projected assignment) followed by `T` rounds of noisy
//! federated Lloyd refinement. Client statistics are summed by a simulated
//! secure-aggregation channel that adds mechanism noise once per aggregate.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod dp;
pub mod error;
pub mod fed;
pub mod init;
pub mod kmeans;
pub mod linalg;
pub mod lloyds;
pub mod points;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use points::{CenterSet, Points, WeightedPoints};
pub use rng::SeedStream;
