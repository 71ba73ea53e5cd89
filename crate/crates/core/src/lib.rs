//! Antidistinguishability of classical and quantum ensembles.
//!
//! The library computes one-shot error probabilities of the optimal
//! "exclude one hypothesis" strategy and bounds on how fast that error decays
//! when many copies are available:
//!
//! * [`classical`] evaluates the minimum-likelihood rule exactly and computes
//!   the multivariate Chernoff divergence, which is the exact error exponent.
//! * [`quantum`] solves the one-shot semidefinite program, and brackets the
//!   quantum error exponent between pairwise Chernoff / measured lower bounds
//!   and the `-ln κ` upper bound.
//! * [`asymptotics`] scans `n`-copy errors and fits the empirical exponent.
//!
//! All divergences that may diverge are returned as [`ExtendedReal`] so that an
//! infinite exponent is an explicit tag rather than an IEEE infinity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod classical;
pub mod ensemble_file;
pub mod error;
pub mod hermitian;
pub mod quantum;
pub mod random;
pub mod sdp;
pub mod simplex;
mod value;

pub use error::{Error, Result};
pub use hermitian::{DensityMatrix, HermitianMatrix, SpectralDecomposition};
pub use value::ExtendedReal;

/// Complex scalar used throughout (a pair of `f64`).
pub type C64 = nalgebra::Complex<f64>;
