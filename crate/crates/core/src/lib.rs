//! Generalized microcanonical sampling with random matrix product states.
//!
//! A random MPS is filtered by repeated application of
//! `G = I - ((H - E) / sigma)^2`, compressing back to a fixed bond dimension
//! after every step. The iterates concentrate in energy around `E`, and
//! averages over independent seeds approximate a microcanonical ensemble.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compress;
pub mod ensemble;
mod env;
pub mod error;
pub mod io;
pub(crate) mod linalg;
pub mod model;
pub mod mpo;
pub mod mps;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::C64;
