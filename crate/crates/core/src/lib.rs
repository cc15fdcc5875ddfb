//! Numerical Finsler geometry for Randers metrics built from Zermelo data.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod calculus;
pub mod domain;
pub mod error;
pub mod expr;
pub mod field;
pub mod foliation;
pub mod geodesic;
pub mod metric;
pub mod numerics;
pub mod scenario;
pub mod transnormal;

pub use error::{FinslerError, Result};
