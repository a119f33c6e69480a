//! Simulation and estimation for particle flow through a type-II optical counter,
//! modelled as a simple linear Boolean coverage process.

// `!(x > 0.0)` is used on purpose throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod flow;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod numerics;
pub mod simulate;

pub use error::{Error, Result};
