//! Per-level moves between adjacent levels of a diffusion path.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::TransitionSpec;
use crate::diffusion::{
    denoising_kernel_first_order, denoising_kernel_second_order, logdet_estimate, Direction, Integrator,
    NoisingKernel, OdeStep, TraceMode,
};
use crate::error::{Error, Result};
use crate::gmm::GaussianMixture;
use crate::oracle::Density;
use crate::paths::DensityPath;

/// Checks that `spec` can run on `path`.
pub fn validate_transition(path: &DensityPath, spec: &TransitionSpec) -> Result<()> {
    let needs_schedule = !matches!(spec, TransitionSpec::NoKernel);
    if needs_schedule && !path.is_diffusion() {
        return Err(Error::InvalidCombination(format!(
            "transition `{}` requires a diffusion path (it needs noising/denoising kernels)",
            spec.label()
        )));
    }
    match spec {
        TransitionSpec::Stoch2 if !path.levels().iter().all(|l| l.has_hessian_diag()) => {
            Err(Error::InvalidCombination("transition `stoch2` requires hessian_diag on every level".into()))
        }
        TransitionSpec::DetIm { max_iters, series_order, tol, trace } => {
            if *max_iters < 1 || *series_order < 1 || !(*tol > 0.0) {
                return Err(Error::InvalidCombination(
                    "transition `det_im` needs max_iters ≥ 1, series_order ≥ 1 and tol > 0".into(),
                ));
            }
            let ok = (0..path.k()).all(|k| {
                let m = path.midpoint(k).expect("diffusion path");
                match trace {
                    TraceMode::ExactDiag => m.has_hessian_diag(),
                    TraceMode::Hutchinson { n_probes } => *n_probes >= 1 && m.has_hessian_vp(),
                }
            });
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidCombination(format!(
                    "transition `{}` requires the matching Hessian oracle and n_probes ≥ 1",
                    spec.label()
                )))
            }
        }
        _ => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct MoveStats {
    pub ddpm_violations: usize,
    pub fp_nonconverged: usize,
    pub fp_iters: usize,
    pub fp_calls: usize,
}

struct Interval<'a> {
    s: f64,
    t: f64,
    noising: NoisingKernel,
    forward: OdeStep,
    backward: OdeStep,
    mid: &'a GaussianMixture,
}

pub(crate) struct Transitions<'a> {
    pub path: &'a DensityPath,
    pub spec: TransitionSpec,
    intervals: Vec<Interval<'a>>,
}

impl<'a> Transitions<'a> {
    pub fn new(path: &'a DensityPath, spec: TransitionSpec) -> Result<Self> {
        validate_transition(path, &spec)?;
        let mut intervals = Vec::new();
        if let Some((sched, grid)) = path.schedule() {
            for k in 0..grid.k() {
                let (s, t) = (grid.times[k], grid.times[k + 1]);
                intervals.push(Interval {
                    s,
                    t,
                    noising: NoisingKernel::new(sched, s, t)?,
                    forward: OdeStep::new(sched, s, t, Direction::Forward, Integrator::Ei, true)?,
                    backward: OdeStep::new(sched, s, t, Direction::Backward, Integrator::Ei, true)?,
                    mid: path.midpoint(k).expect("diffusion path"),
                });
            }
        }
        Ok(Self { path, spec, intervals })
    }

    fn schedule(&self) -> &crate::diffusion::NoiseSchedule {
        self.path.schedule().expect("validated").0
    }

    /// Backward kernel conditioned on `x1` at level k + 1.
    fn backward_kernel(
        &self,
        k: usize,
        x1: &[f64],
        score1: &[f64],
        stats: &mut MoveStats,
    ) -> Option<crate::diffusion::GaussianKernel> {
        let iv = &self.intervals[k];
        match self.spec {
            TransitionSpec::Stoch1 => {
                denoising_kernel_first_order(self.schedule(), iv.s, iv.t, x1, score1, Integrator::Ei).ok()
            }
            TransitionSpec::Stoch2 => {
                let mut h = vec![0.0; x1.len()];
                self.path.level(k + 1).hessian_diag(x1, &mut h).ok()?;
                match denoising_kernel_second_order(self.schedule(), iv.s, iv.t, x1, score1, &h) {
                    Ok(k) => Some(k),
                    Err(_) => {
                        stats.ddpm_violations += 1;
                        None
                    }
                }
            }
            _ => unreachable!("stochastic transitions only"),
        }
    }

    /// Implicit-midpoint map of interval k plus its log-determinant.
    fn det_map<R: Rng + ?Sized>(
        &self,
        k: usize,
        direction: Direction,
        x: &[f64],
        rng: &mut R,
        out: &mut [f64],
        stats: &mut MoveStats,
    ) -> Result<f64> {
        let TransitionSpec::DetIm { max_iters, series_order, tol, trace } = self.spec else {
            unreachable!("deterministic transitions only")
        };
        let iv = &self.intervals[k];
        let step = match direction {
            Direction::Forward => &iv.forward,
            Direction::Backward => &iv.backward,
        };
        let fp = step.implicit(x, iv.mid, max_iters, tol, out);
        stats.fp_calls += 1;
        stats.fp_iters += fp.iterations;
        stats.fp_nonconverged += (!fp.converged) as usize;
        logdet_estimate(step, x, out, series_order, trace, iv.mid, rng)
    }

    /// Moves `x1` from level k + 1 to level k.
    ///
    /// `lp1` is log p_{k+1}(x1). On return `out` holds the new point; the
    /// result is (incremental log-weight, log p_k(out)).
    pub fn backward_move<R: Rng + ?Sized>(
        &self,
        k: usize,
        x1: &[f64],
        lp1: f64,
        rng: &mut R,
        out: &mut [f64],
        stats: &mut MoveStats,
    ) -> (f64, f64) {
        let lk = self.path.level(k);
        match self.spec {
            TransitionSpec::NoKernel => {
                out.copy_from_slice(x1);
                let lp0 = lk.log_density(x1);
                (lp0 - lp1, lp0)
            }
            TransitionSpec::Stoch1 | TransitionSpec::Stoch2 => {
                let mut score1 = vec![0.0; x1.len()];
                self.path.level(k + 1).score(x1, &mut score1);
                let Some(kern) = self.backward_kernel(k, x1, &score1, stats) else {
                    out.copy_from_slice(x1);
                    return (f64::NEG_INFINITY, lk.log_density(x1));
                };
                kern.sample(rng, out);
                let q_b = kern.log_pdf(out);
                let q_f = self.intervals[k].noising.log_pdf(x1, out);
                let lp0 = lk.log_density(out);
                (lp0 + q_f - lp1 - q_b, lp0)
            }
            TransitionSpec::DetIm { .. } => {
                let ld = self.det_map(k, Direction::Backward, x1, rng, out, stats);
                let lp0 = lk.log_density(out);
                (ld.map_or(f64::NEG_INFINITY, |ld| lp0 + ld - lp1), lp0)
            }
        }
    }

    /// Proposes new states for the pair (k, k + 1) and returns the log acceptance ratio.
    ///
    /// `lp0`, `lp1` are the current log-densities at levels k and k + 1.
    #[allow(clippy::too_many_arguments)]
    pub fn swap_proposal<R: Rng + ?Sized>(
        &self,
        k: usize,
        x0: &[f64],
        lp0: f64,
        x1: &[f64],
        lp1: f64,
        rng: &mut R,
        y0: &mut [f64],
        y1: &mut [f64],
        stats: &mut MoveStats,
    ) -> f64 {
        let (l0, l1) = (self.path.level(k), self.path.level(k + 1));
        match self.spec {
            TransitionSpec::NoKernel => {
                y0.copy_from_slice(x1);
                y1.copy_from_slice(x0);
                l0.log_density(x1) + l1.log_density(x0) - lp0 - lp1
            }
            TransitionSpec::Stoch1 | TransitionSpec::Stoch2 => {
                let nk = &self.intervals[k].noising;
                nk.sample(x0, rng, y1);
                let d = x0.len();
                let mut sc = vec![0.0; d];
                l1.score(x1, &mut sc);
                let Some(kb_x) = self.backward_kernel(k, x1, &sc, stats) else {
                    return f64::NEG_INFINITY;
                };
                kb_x.sample(rng, y0);
                l1.score(y1, &mut sc);
                let Some(kb_y) = self.backward_kernel(k, y1, &sc, stats) else {
                    return f64::NEG_INFINITY;
                };
                let num = l0.log_density(y0) + l1.log_density(y1) + nk.log_pdf(x1, y0) + kb_y.log_pdf(x0);
                let den = lp0 + lp1 + nk.log_pdf(y1, x0) + kb_x.log_pdf(y0);
                num - den
            }
            TransitionSpec::DetIm { .. } => {
                let fwd = self.det_map(k, Direction::Forward, x0, rng, y1, stats);
                let bwd = self.det_map(k, Direction::Backward, x1, rng, y0, stats);
                match (fwd, bwd) {
                    (Ok(lf), Ok(lb)) => l1.log_density(y1) + lf + l0.log_density(y0) + lb - lp0 - lp1,
                    _ => f64::NEG_INFINITY,
                }
            }
        }
    }
}
