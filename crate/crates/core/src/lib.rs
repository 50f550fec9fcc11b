//! State-vector simulation of quantum singular value thresholding.
//!
//! The crate builds the full circuit (state preparation, phase estimation, a
//! Newton-iteration threshold oracle, a rotation cascade, uncomputation and
//! post-selection) on a dense simulator, and pairs it with the classical theory
//! for choosing the rotation scale `alpha`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha;
pub mod error;
pub mod harness;
pub mod pipeline;
pub mod qpe;
pub mod rotation;
pub mod sim;
pub mod spectral;

pub use error::{QsvtError, Result};
