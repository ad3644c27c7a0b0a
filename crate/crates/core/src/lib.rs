//! SVD-parameterized weight matrices built from Householder reflectors,
//! with hand-written backpropagation and a synthetic-task training harness.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod householder;
pub mod layers;
pub mod matrix;
pub mod svd_param;
pub mod tasks;
pub mod training;

pub use error::{Error, Result};
