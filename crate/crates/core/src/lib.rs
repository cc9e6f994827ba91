//! Numerical laboratory for the space-time fractional stochastic heat
//! equation `∂_t^β u = -(-Δ)^{α/2} u + I_t^{1-β}[b(u) + σ(u) Ẇ]` on the line,
//! driven through its mild formulation with truncated coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod io;
pub mod kernel;
pub mod quad;
pub mod solver;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
