//! Annealed Monte Carlo engines: MALA, AIS, SMC, replica exchange and plain IS.

mod ais;
mod is;
mod mala;
mod re;
mod resample;
mod transition;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use ais::{ais_run, smc_run, AisOutput};
pub use is::{importance_sampling, IsOutput};
pub use mala::{mala_chain, Mala, MalaOutcome};
pub use re::{re_run, ReOutput};
pub use resample::systematic_resample;
pub use transition::validate_transition;

use crate::diffusion::TraceMode;
use crate::error::{invalid, Result};
use crate::math::{log_sum_exp, PointSet};
use crate::metrics::ess_fraction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransitionSpec {
    /// Marginal densities only.
    NoKernel,
    /// First-order EI denoising backward kernel, exact noising forward kernel.
    Stoch1,
    /// DDPM second-order backward kernel, exact noising forward kernel.
    Stoch2,
    /// Implicit-midpoint PF-ODE maps with a power-series log-determinant.
    DetIm {
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_series_order")]
        series_order: usize,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default)]
        trace: TraceMode,
    },
}

fn default_max_iters() -> usize {
    4
}
fn default_series_order() -> usize {
    3
}
fn default_tol() -> f64 {
    1e-8
}

impl TransitionSpec {
    pub fn det_im(trace: TraceMode) -> Self {
        Self::DetIm { max_iters: 4, series_order: 3, tol: 1e-8, trace }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::NoKernel => "none",
            Self::Stoch1 => "stoch1",
            Self::Stoch2 => "stoch2",
            Self::DetIm { trace: TraceMode::ExactDiag, .. } => "det_hessian",
            Self::DetIm { trace: TraceMode::Hutchinson { .. }, .. } => "det_hutchinson",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReInit {
    Base,
    /// Reverse-SDE trajectories; falls back to `Base` on tempering paths.
    #[default]
    ScoreInformed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_particles: usize,
    pub mcmc_steps: usize,
    pub mcmc_warmup: usize,
    pub keep_last: usize,
    pub ess_threshold: f64,
    pub re_total_steps: usize,
    pub re_warmup: usize,
    pub re_chains: usize,
    pub swap_period: usize,
    pub mala_step0: f64,
    pub mala_target_accept: f64,
    pub re_init: ReInit,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_particles: 8192,
            mcmc_steps: 160,
            mcmc_warmup: 128,
            keep_last: 32,
            ess_threshold: 0.30,
            re_total_steps: 24576,
            re_warmup: 8192,
            re_chains: 4,
            swap_period: 8,
            mala_step0: 0.01,
            mala_target_accept: 0.70,
            re_init: ReInit::ScoreInformed,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_particles", self.n_particles),
            ("re_total_steps", self.re_total_steps),
            ("re_chains", self.re_chains),
            ("swap_period", self.swap_period),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.mcmc_warmup > self.mcmc_steps {
            return Err(invalid("mcmc_warmup", "exceeds mcmc_steps"));
        }
        if self.keep_last > self.mcmc_steps - self.mcmc_warmup {
            return Err(invalid("keep_last", "exceeds the post-warm-up MCMC steps"));
        }
        if self.re_warmup >= self.re_total_steps {
            return Err(invalid("re_warmup", "must be below re_total_steps"));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold < 1.0) {
            return Err(invalid("ess_threshold", "must lie in (0, 1)"));
        }
        if !(self.mala_target_accept > 0.0 && self.mala_target_accept < 1.0) {
            return Err(invalid("mala_target_accept", "must lie in (0, 1)"));
        }
        if !(self.mala_step0 >= mala::STEP_MIN && self.mala_step0 <= mala::STEP_MAX) {
            return Err(invalid("mala_step0", "must lie in [1e-6, 1]"));
        }
        Ok(())
    }
}

/// Points with (unnormalized) log-weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSamples {
    pub points: PointSet,
    pub log_weights: Vec<f64>,
}

impl WeightedSamples {
    pub fn uniform(points: PointSet) -> Self {
        let n = points.len();
        Self { points, log_weights: alloc::vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Self-normalized weights (all zero when every log-weight is −∞).
    pub fn normalized_weights(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.log_weights);
        if !lse.is_finite() {
            return alloc::vec![0.0; self.log_weights.len()];
        }
        self.log_weights.iter().map(|l| num_traits::Float::exp(l - lse)).collect()
    }

    pub fn ess_fraction(&self) -> Result<f64> {
        ess_fraction(&self.log_weights)
    }
}

/// Per-level counters collected during a sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub ess_fraction: f64,
    pub resampled: bool,
    pub mala_acceptance: f64,
    pub mean_step: f64,
    pub nonfinite_weights: usize,
    pub ddpm_violations: usize,
    pub fp_nonconverged: usize,
    pub fp_mean_iters: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SwapDiagnostics {
    pub pair: usize,
    pub attempts: usize,
    pub accepted: usize,
    pub nonfinite: usize,
    pub ddpm_violations: usize,
    pub fp_nonconverged: usize,
}

impl SwapDiagnostics {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}
