#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjustment;
pub mod diffexpr;
pub mod distort;
pub mod error;
pub mod estimation;
pub mod model;
pub mod pca;
pub mod spline;

pub use error::{Error, Result};
