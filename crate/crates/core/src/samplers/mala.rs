use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::PointSet;
use crate::oracle::Density;

pub(crate) const STEP_MIN: f64 = 1e-6;
pub(crate) const STEP_MAX: f64 = 1.0;

/// MALA with multiplicative step-size adaptation towards a target acceptance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mala {
    pub target_accept: f64,
    pub adapt: bool,
}

impl Default for Mala {
    fn default() -> Self {
        Self { target_accept: 0.70, adapt: true }
    }
}

/// Current point with its cached log-density and score.
pub(crate) struct Walker {
    pub x: Vec<f64>,
    pub lp: f64,
    pub score: Vec<f64>,
    prop: Vec<f64>,
    prop_score: Vec<f64>,
}

impl Walker {
    pub fn new<D: Density + ?Sized>(level: &D, x: &[f64]) -> Self {
        let d = x.len();
        let mut w = Self { x: x.to_vec(), lp: 0.0, score: vec![0.0; d], prop: vec![0.0; d], prop_score: vec![0.0; d] };
        w.lp = level.log_density_and_score(x, &mut w.score);
        w
    }

    pub fn reset<D: Density + ?Sized>(&mut self, level: &D, x: &[f64]) {
        self.x.copy_from_slice(x);
        self.lp = level.log_density_and_score(x, &mut self.score);
    }
}

impl Mala {
    /// One MH-corrected Langevin step; returns whether the proposal was accepted.
    pub(crate) fn step<D: Density + ?Sized, R: Rng + ?Sized>(
        &self,
        level: &D,
        w: &mut Walker,
        h: &mut f64,
        rng: &mut R,
    ) -> bool {
        let hh = *h;
        let sd = (2.0 * hh).sqrt();
        for j in 0..w.x.len() {
            let z: f64 = rng.sample(StandardNormal);
            w.prop[j] = w.x[j] + hh * w.score[j] + sd * z;
        }
        let lp_new = level.log_density_and_score(&w.prop, &mut w.prop_score);
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for j in 0..w.x.len() {
            let a = w.prop[j] - w.x[j] - hh * w.score[j];
            let b = w.x[j] - w.prop[j] - hh * w.prop_score[j];
            fwd += a * a;
            bwd += b * b;
        }
        let log_ratio = lp_new - w.lp + (fwd - bwd) / (4.0 * hh);
        let u: f64 = rng.random();
        let accept = log_ratio.is_finite() && lp_new.is_finite() && u.ln() < log_ratio;
        if self.adapt {
            let alpha = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            *h = if alpha > self.target_accept { hh * 1.02 } else { hh * 0.98 }.clamp(STEP_MIN, STEP_MAX);
        }
        if accept {
            core::mem::swap(&mut w.x, &mut w.prop);
            core::mem::swap(&mut w.score, &mut w.prop_score);
            w.lp = lp_new;
        }
        accept
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MalaOutcome {
    pub x: Vec<f64>,
    /// Last `keep_last` states of the chain, oldest first.
    pub tail: PointSet,
    pub acceptance_rate: f64,
    pub step: f64,
}

pub fn mala_chain<D: Density + ?Sized, R: Rng + ?Sized>(
    level: &D,
    x0: &[f64],
    n_steps: usize,
    step: f64,
    keep_last: usize,
    mala: Mala,
    rng: &mut R,
) -> Result<MalaOutcome> {
    let mut w = Walker::new(level, x0);
    if !w.lp.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut h = step;
    let mut accepted = 0;
    let mut tail = PointSet::with_capacity(keep_last.min(n_steps), x0.len());
    for i in 0..n_steps {
        accepted += mala.step(level, &mut w, &mut h, rng) as usize;
        if i + keep_last >= n_steps {
            tail.push(&w.x);
        }
    }
    let rate = if n_steps == 0 { 0.0 } else { accepted as f64 / n_steps as f64 };
    Ok(MalaOutcome { x: w.x, tail, acceptance_rate: rate, step: h })
}
