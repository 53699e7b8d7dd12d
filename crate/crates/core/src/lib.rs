//! Numerical laboratory for studying how adversarial robustness transfers
//! from a proxy distribution to the distribution it approximates.
//!
//! The crate provides analytically tractable labeled distributions, small
//! differentiable classifiers with exact gradients, conditional Wasserstein
//! distance estimators, PGD attacks and average-robustness estimation,
//! mixed real/proxy adversarial training, robust-discrimination proximity
//! metrics (the ARC curve), and randomized-smoothing certification.
//!
//! Everything is seeded and deterministic on a fixed platform: samplers take
//! an explicit [`numerics::Rng`], and parallel code derives independent child
//! generators per work item so results do not depend on scheduling.

pub mod classifiers;
pub mod distributions;
pub mod error;
pub mod numerics;
pub mod proximity;
pub mod robustness;
pub mod transport;

pub use error::{Error, Result};
