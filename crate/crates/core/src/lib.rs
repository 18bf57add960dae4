//! Certified upper bounds on the matrix multiplication exponent from lower
//! bounds on the value of tensor powers.

pub mod cache;
pub mod constructions;
pub mod distribution;
pub mod error;
pub mod format;
pub mod kernel;
pub mod omega;
pub mod power;
pub mod reference;
pub mod solvers;
pub mod support;

pub use error::{Error, Result};
