//! Annealed Monte Carlo on diffusion-induced density paths.
//!
//! Exact Gaussian-mixture targets, VP/VE noise schedules, stochastic and
//! deterministic transitions between diffusion marginals, and the AIS, SMC
//! and replica-exchange engines that consume them.
#![no_std]

extern crate alloc;

pub mod diffusion;
pub mod error;
pub mod gmm;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod paths;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
pub use gmm::{GaussianMixture, TargetFamily, TargetSpec};
pub use math::PointSet;
pub use oracle::Density;
