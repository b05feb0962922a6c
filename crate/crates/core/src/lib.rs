//! Robust coordinate gradient descent for linear models.
//!
//! Partial derivatives of the empirical risk are replaced by robust univariate
//! estimates (median-of-means, trimmed mean or Catoni-Holland) of the per-sample
//! derivatives, which keeps the iterates stable under heavy tails and a fraction
//! of arbitrary outliers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod datagen;
pub mod error;
pub mod grad;
pub mod harness;
pub mod losses;
pub mod rng;
pub mod robust;
pub mod solver;

pub use error::{Error, Result};
pub use losses::Loss;
pub use robust::{EstimatorSpec, Workspace};
