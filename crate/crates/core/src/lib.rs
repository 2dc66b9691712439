//! Computational checks for 3-quasi-Sasakian manifolds given in a single chart.

// NaN must fail tolerance checks, hence `!(x <= tol)`; index loops mirror the
// tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalog;
pub mod contact3;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod report;
pub mod sampling;
pub mod stats;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
