//! Truncated singular integrals on finite metric measure spaces.
//!
//! The crate builds discrete measures on point clouds, antisymmetric kernels
//! with size bounds, exactly certified good radii for the radial mass
//! distribution of a measure, and the truncated operators and pairings whose
//! stabilization along good radii is checked numerically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod good_radii;
pub mod kernel;
pub mod measure;
pub mod metric;
pub mod operator;
pub mod rational;
pub mod reduce;

pub use error::{Error, Result};
