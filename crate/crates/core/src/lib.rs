//! Numerical laboratory for deformed Wigner matrices `H = W + D`.
//!
//! The deterministic side ([`mde`], [`observables`], [`detchains`]) computes
//! the Matrix Dyson Equation, regular observables and the deterministic
//! approximations of resolvent chains. The random side ([`ensembles`],
//! [`spectral`], [`experiments`]) samples matrices, diagonalises them and
//! checks eigenvector statistics against the deterministic predictions.
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detchains;
pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod exec;
pub mod linalg;
pub mod mde;
pub mod observables;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{LabError, Result};
pub use num_complex::Complex64 as c64;
