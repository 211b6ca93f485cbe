//! Finite-key rate computation for the sending-or-not-sending twin-field
//! QKD protocol with code bits drawn from any heralded intensity pair.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aopp;
pub mod decoy;
pub mod error;
pub mod keylength;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod pipeline;
mod quad;
pub mod stats;

pub use error::{Error, Result};
