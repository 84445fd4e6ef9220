//! Exact Poisson binomial mass functions, entropy derivatives along affine parameter
//! paths, margin checkers for the log-concavity ladder behind concavity of the entropy,
//! and explorers for Rényi/Tsallis generalizations.

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculus;
pub mod error;
pub mod explorer;
pub mod fd;
pub mod inequalities;
pub mod linalg;
pub mod pmf;
pub mod qentropy;

pub use error::{Error, Result};
