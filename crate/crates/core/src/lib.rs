// NaN-rejecting `!(x > 0.0)` checks and index loops over stencils are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dem;
pub mod ensemble;
pub mod eos;
pub mod error;
pub mod front_tracking;
pub mod harness;
pub mod mesh;
pub mod microscale;
pub mod riemann;
pub mod stats;

pub use error::{Error, Result};
