//! Joint rate and power adaptation for a cognitive radio link that shares
//! spectrum with a primary link, both using adaptive modulation and coding.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amc;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod fading;
pub mod optimizer;
pub mod quadrature;
pub mod regions;
pub mod simulate;

pub use error::{Error, Result};
pub use optimizer::Feasibility;
