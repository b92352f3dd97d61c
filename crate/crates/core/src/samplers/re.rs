use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mala::{Mala, Walker};
use super::transition::{MoveStats, Transitions};
use super::{ReInit, SamplerConfig, SwapDiagnostics, TransitionSpec};
use crate::diffusion::{denoising_kernel_first_order, Integrator};
use crate::error::Result;
use crate::math::PointSet;
use crate::oracle::Density;
use crate::paths::DensityPath;
use crate::rng::{role, stream, StreamRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReOutput {
    /// Level-0 states recorded just before each post-warm-up swap round, chain-major.
    pub samples: PointSet,
    /// Swap statistics for every adjacent pair (k, k + 1).
    pub swaps: Vec<SwapDiagnostics>,
    /// Parity (0 = even pairs, 1 = odd pairs) of each communication round.
    pub round_parity: Vec<u8>,
    pub mala_acceptance: Vec<f64>,
    pub init: ReInit,
}

impl ReOutput {
    pub fn swap_rate(&self) -> f64 {
        let (a, n) = self.swaps.iter().fold((0, 0), |(a, n), s| (a + s.accepted, n + s.attempts));
        if n == 0 {
            0.0
        } else {
            a as f64 / n as f64
        }
    }
}

/// Non-reversible replica exchange with deterministic even/odd swap rounds.
pub fn re_run(path: &DensityPath, spec: TransitionSpec, cfg: &SamplerConfig, seed: u64) -> Result<ReOutput> {
    cfg.validate()?;
    let tr = Transitions::new(path, spec)?;
    let (d, big_k) = (path.dim(), path.k());
    let mala = Mala { target_accept: cfg.mala_target_accept, adapt: true };
    let init = if path.is_diffusion() { cfg.re_init } else { ReInit::Base };
    let n_rounds = cfg.re_total_steps / cfg.swap_period;
    let leftover = cfg.re_total_steps % cfg.swap_period;

    let mut samples = PointSet::with_capacity(cfg.re_chains * n_rounds, d);
    let mut swaps: Vec<SwapDiagnostics> =
        (0..big_k).map(|pair| SwapDiagnostics { pair, ..Default::default() }).collect();
    let mut round_parity = Vec::with_capacity(n_rounds);
    let mut acc = vec![0usize; big_k + 1];
    let mut y0 = vec![0.0; d];
    let mut y1 = vec![0.0; d];

    for c in 0..cfg.re_chains {
        let mut rngs: Vec<StreamRng> =
            (0..=big_k).map(|k| stream(seed, &[role::CHAIN_LEVEL, c as u64, k as u64])).collect();
        let mut swap_rng = stream(seed, &[role::SWAP, c as u64]);
        let start = initial_states(path, init, seed, c, &mut rngs)?;
        let mut walkers: Vec<Walker> = (0..=big_k).map(|k| Walker::new(path.level(k), start.row(k))).collect();
        let mut steps = vec![cfg.mala_step0; big_k + 1];
        let mut stats = MoveStats::default();

        for r in 0..n_rounds {
            for k in 0..=big_k {
                for _ in 0..cfg.swap_period {
                    acc[k] += mala.step(path.level(k), &mut walkers[k], &mut steps[k], &mut rngs[k]) as usize;
                }
            }
            if (r + 1) * cfg.swap_period > cfg.re_warmup {
                samples.push(&walkers[0].x);
            }
            let parity = (r % 2) as u8;
            if c == 0 {
                round_parity.push(parity);
            }
            for k in (parity as usize..big_k).step_by(2) {
                let before = stats;
                let log_alpha = tr.swap_proposal(
                    k,
                    &walkers[k].x,
                    walkers[k].lp,
                    &walkers[k + 1].x,
                    walkers[k + 1].lp,
                    &mut swap_rng,
                    &mut y0,
                    &mut y1,
                    &mut stats,
                );
                let sw = &mut swaps[k];
                sw.attempts += 1;
                sw.ddpm_violations += stats.ddpm_violations - before.ddpm_violations;
                sw.fp_nonconverged += stats.fp_nonconverged - before.fp_nonconverged;
                let u: f64 = swap_rng.random();
                if log_alpha.is_nan() || log_alpha == f64::INFINITY {
                    sw.nonfinite += 1;
                } else if u.ln() < log_alpha {
                    sw.accepted += 1;
                    walkers[k].reset(path.level(k), &y0);
                    walkers[k + 1].reset(path.level(k + 1), &y1);
                } else if log_alpha == f64::NEG_INFINITY {
                    sw.nonfinite += 1;
                }
            }
        }
        for k in 0..=big_k {
            for _ in 0..leftover {
                acc[k] += mala.step(path.level(k), &mut walkers[k], &mut steps[k], &mut rngs[k]) as usize;
            }
        }
    }
    let total = (cfg.re_chains * cfg.re_total_steps) as f64;
    let mala_acceptance = acc.iter().map(|a| *a as f64 / total).collect();
    Ok(ReOutput { samples, swaps, round_parity, mala_acceptance, init })
}

/// Starting state of every level for chain `c`.
fn initial_states(
    path: &DensityPath,
    init: ReInit,
    seed: u64,
    c: usize,
    rngs: &mut [StreamRng],
) -> Result<PointSet> {
    let (d, big_k) = (path.dim(), path.k());
    let mut out = PointSet::zeros(big_k + 1, d);
    match init {
        ReInit::Base => {
            for k in 0..=big_k {
                for v in out.row_mut(k).iter_mut() {
                    *v = StandardNormal.sample(&mut rngs[k]);
                }
            }
        }
        ReInit::ScoreInformed => {
            let (sched, grid) = path.schedule().expect("score-informed init needs a diffusion path");
            let mut rng = stream(seed, &[role::INIT, c as u64]);
            let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut sc = vec![0.0; d];
            out.row_mut(big_k).copy_from_slice(&x);
            for k in (0..big_k).rev() {
                path.level(k + 1).score(&x, &mut sc);
                let kern =
                    denoising_kernel_first_order(sched, grid.times[k], grid.times[k + 1], &x, &sc, Integrator::Ei)?;
                kern.sample(&mut rng, &mut x);
                out.row_mut(k).copy_from_slice(&x);
            }
        }
    }
    Ok(out)
}
