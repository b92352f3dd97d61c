//! Config-driven experiment runner for annealed samplers on density paths.

pub mod config;
pub mod plot;
pub mod runner;
pub mod viz;
