//! Robust density estimation from dependent observations.
//!
//! The crate estimates the stationary law of a (possibly contaminated,
//! possibly dependent) series by running ρ-estimators on spaced sub-samples
//! and aggregating them in Hellinger distance. Around that core it provides
//! finite hidden-Markov model grids, emission families, exact dependence
//! diagnostics for finite chains, seeded simulators and an experiment
//! harness.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod dependence;
pub mod error;
pub mod families;
pub mod harness;
pub mod hmm;
pub mod io;
pub mod measure;
pub mod rho;
pub mod spacing;

pub use error::{Error, Result};
