//! Offset-robust sensing for clock-asynchronous bistatic OFDM links.
//!
//! The crate simulates multi-antenna CSI corrupted by timing and carrier
//! frequency offsets, estimates target parameters with subspace methods,
//! tracks the offsets against the line-of-sight path with a Kalman filter and
//! compares the results with Cramer-Rao bounds in a seeded Monte Carlo
//! harness.

// `!(x > 0.0)` style guards are used on purpose to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crb;
pub mod error;
pub mod exec;
pub mod harness;
pub mod scene;
pub mod subspace;
pub mod tvoe;
pub mod waveform;

pub use error::{Error, Result};
pub use exec::Exec;
