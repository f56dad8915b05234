//! Joint estimation of a user's ideal point and a Mahalanobis metric from
//! one-bit paired comparisons.
//!
//! A user is modeled by a latent ideal point `u` in the same feature space
//! as a fixed, known set of items; comparisons reveal which of two items is
//! closer to `u` under an unknown metric `M`. This crate provides:
//!
//! - the observation model and the linear operators it induces
//!   ([`geometry`], [`operators`]),
//! - a first-order splitting solver for the convex semidefinite programs
//!   that recover `M` together with consistent distances ([`solver`]),
//! - end-to-end estimation pipelines: single-step, alternating refinement,
//!   and two Euclidean baselines ([`estimators`]),
//! - ranking and reconstruction error metrics ([`evaluation`]),
//! - seeded synthetic instance generation ([`synthdata`]).

pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod geometry;
mod linalg;
pub mod operators;
pub mod solver;
pub mod synthdata;
#[cfg(feature = "test-oracle")]
pub mod test_oracle;

pub use error::{Error, Result};
