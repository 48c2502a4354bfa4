//! Structured state-feedback synthesis for interconnected LTI systems.
//!
//! Each subsystem gets a local dissipation inequality in `(S_i, P_i, Y_i)`;
//! a single interconnection inequality couples the local supply matrices
//! `S_i`. Consensus ADMM (optionally accelerated) splits the two, and the
//! gains `K_i = B_i^+ P_i^-1 Y_i` are verified on the assembled closed loop.

// `!(x > 0.0)` is used deliberately so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod analysis;
pub mod error;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod sdp;
pub mod synthesis;

pub use error::{Error, Result};
