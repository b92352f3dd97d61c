use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mala::{Mala, Walker};
use super::transition::{MoveStats, Transitions};
use super::{systematic_resample, LevelDiagnostics, SamplerConfig, TransitionSpec, WeightedSamples};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, std_normal_log_pdf, PointSet};
use crate::metrics::ess_fraction;
use crate::oracle::Density;
use crate::paths::DensityPath;
use crate::rng::{role, stream, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AisOutput {
    /// Final level-0 particles with their log-weights.
    pub ensemble: WeightedSamples,
    /// Level-0 MCMC tails (each inheriting its particle's weight) when MCMC
    /// ran at level 0, otherwise the ensemble itself.
    pub samples: WeightedSamples,
    pub log_normalizer: f64,
    /// Ancestor index of every final particle across all resampling events.
    pub ancestry: Vec<usize>,
    pub levels: Vec<LevelDiagnostics>,
    pub n_resampled: usize,
}

/// Annealed importance sampling from N(0, I) (level K) down to level 0.
///
/// Kernel-based transitions run without MCMC; the marginal-only variant
/// applies MALA at every level. All randomness derives from `seed`.
pub fn ais_run(path: &DensityPath, spec: TransitionSpec, cfg: &SamplerConfig, seed: u64) -> Result<AisOutput> {
    let mcmc = matches!(spec, TransitionSpec::NoKernel);
    sweep(path, spec, cfg, seed, false, mcmc)
}

/// AIS with ESS-triggered systematic resampling and MALA rejuvenation at every level.
pub fn smc_run(path: &DensityPath, spec: TransitionSpec, cfg: &SamplerConfig, seed: u64) -> Result<AisOutput> {
    sweep(path, spec, cfg, seed, true, true)
}

fn sweep(
    path: &DensityPath,
    spec: TransitionSpec,
    cfg: &SamplerConfig,
    seed: u64,
    resample: bool,
    mcmc: bool,
) -> Result<AisOutput> {
    cfg.validate()?;
    let tr = Transitions::new(path, spec)?;
    let (n, d, big_k) = (cfg.n_particles, path.dim(), path.k());
    let mala = Mala { target_accept: cfg.mala_target_accept, adapt: true };
    let mut rngs: Vec<StreamRng> = (0..n).map(|i| stream(seed, &[role::PARTICLE, i as u64])).collect();
    let mut x = PointSet::zeros(n, d);
    let mut lp = vec![0.0; n];
    let mut logw = vec![0.0; n];
    let mut steps = vec![cfg.mala_step0; n];
    let mut ancestry: Vec<usize> = (0..n).collect();
    let top = path.level(big_k);
    for i in 0..n {
        let row = x.row_mut(i);
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rngs[i]);
        }
        lp[i] = top.log_density(row);
        logw[i] = lp[i] - std_normal_log_pdf(row);
    }

    let mut levels = Vec::with_capacity(big_k);
    let mut log_z = 0.0;
    let mut n_resampled = 0;
    let mut y = vec![0.0; d];
    let mut tails = PointSet::with_capacity(if mcmc { n * cfg.keep_last } else { 0 }, d);
    let mut tail_lw = Vec::new();
    for k in (0..big_k).rev() {
        let mut stats = MoveStats::default();
        let mut diag = LevelDiagnostics { level: k, ..Default::default() };
        for i in 0..n {
            let (incr, lp_new) = tr.backward_move(k, x.row(i), lp[i], &mut rngs[i], &mut y, &mut stats);
            x.row_mut(i).copy_from_slice(&y);
            lp[i] = lp_new;
            logw[i] += incr;
            if !logw[i].is_finite() {
                logw[i] = f64::NEG_INFINITY;
                diag.nonfinite_weights += 1;
            }
        }
        diag.ess_fraction = ess_fraction(&logw)?;
        if resample && diag.ess_fraction < cfg.ess_threshold {
            let lse = log_sum_exp(&logw);
            log_z += lse - (n as f64).ln();
            let w: Vec<f64> = logw.iter().map(|l| (l - lse).exp()).collect();
            let mut rrng = stream(seed, &[role::RESAMPLE, k as u64]);
            let anc = systematic_resample(&w, n, &mut rrng);
            let old = x.clone();
            let old_lp = lp.clone();
            let old_anc = ancestry.clone();
            for (i, &a) in anc.iter().enumerate() {
                x.row_mut(i).copy_from_slice(old.row(a));
                lp[i] = old_lp[a];
                ancestry[i] = old_anc[a];
            }
            logw.fill(0.0);
            diag.resampled = true;
            n_resampled += 1;
        }
        if mcmc && cfg.mcmc_steps > 0 {
            let level = path.level(k);
            let tail_from = cfg.mcmc_steps - cfg.keep_last;
            let mut accepted = 0usize;
            let mut moved = 0usize;
            for i in 0..n {
                if logw[i] == f64::NEG_INFINITY {
                    continue;
                }
                let mut w = Walker::new(level, x.row(i));
                if !w.lp.is_finite() {
                    continue;
                }
                for s in 0..cfg.mcmc_steps {
                    accepted += mala.step(level, &mut w, &mut steps[i], &mut rngs[i]) as usize;
                    if k == 0 && s >= tail_from {
                        tails.push(&w.x);
                        tail_lw.push(logw[i]);
                    }
                }
                moved += cfg.mcmc_steps;
                x.row_mut(i).copy_from_slice(&w.x);
                lp[i] = w.lp;
            }
            diag.mala_acceptance = if moved == 0 { 0.0 } else { accepted as f64 / moved as f64 };
            diag.mean_step = steps.iter().sum::<f64>() / n as f64;
        }
        diag.ddpm_violations = stats.ddpm_violations;
        diag.fp_nonconverged = stats.fp_nonconverged;
        diag.fp_mean_iters = if stats.fp_calls == 0 { 0.0 } else { stats.fp_iters as f64 / stats.fp_calls as f64 };
        levels.push(diag);
    }
    if logw.iter().all(|l| *l == f64::NEG_INFINITY) {
        return Err(Error::DegenerateWeights);
    }
    log_z += log_sum_exp(&logw) - (n as f64).ln();
    let ensemble = WeightedSamples { points: x, log_weights: logw };
    let samples = if mcmc && !tails.is_empty() {
        WeightedSamples { points: tails, log_weights: tail_lw }
    } else {
        ensemble.clone()
    };
    Ok(AisOutput { ensemble, samples, log_normalizer: log_z, ancestry, levels, n_resampled })
}
