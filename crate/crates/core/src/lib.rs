//! Minimal quadratic control energy for moving the probability of a terminal
//! halfspace event `{wᵀX_T ≥ a}` in a linear-Gaussian system, the matched
//! filter that achieves it, and Monte Carlo checks of the equality.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod gramian;
pub mod kl;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod report;
pub mod translator;

pub use error::{Error, Result};
