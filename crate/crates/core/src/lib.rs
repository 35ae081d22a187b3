//! Scattering and spectral statistics for one-dimensional random Schrödinger operators
//! built from randomly coupled copies of a single-site potential.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod par;
pub mod periodic;
pub mod potential;
pub mod scattering;
pub mod thouless;

pub use error::{Error, Result};
