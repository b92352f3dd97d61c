use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Integrator, NoiseSchedule};
use crate::error::{invalid, Error, Result};
use crate::math::dot;
use crate::oracle::Density;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// From time s up to time t (towards noise).
    Forward,
    /// From time t down to time s (towards data).
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceMode {
    ExactDiag,
    Hutchinson { n_probes: usize },
}

impl Default for TraceMode {
    fn default() -> Self {
        Self::ExactDiag
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPoint {
    pub iterations: usize,
    pub converged: bool,
}

/// One PF-ODE step between s < t, written as y = c·x + κ·score(τ, z).
///
/// For explicit steps z = x and τ is the starting time; for implicit
/// midpoint steps z = (x + y)/2 and τ = (s + t)/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeStep {
    pub s: f64,
    pub t: f64,
    pub direction: Direction,
    pub integrator: Integrator,
    pub implicit: bool,
    pub c: f64,
    pub kappa: f64,
    sched: NoiseSchedule,
}

impl OdeStep {
    pub fn new(
        sched: &NoiseSchedule,
        s: f64,
        t: f64,
        direction: Direction,
        integrator: Integrator,
        implicit: bool,
    ) -> Result<Self> {
        if !(s < t) {
            return Err(invalid("s", "map needs s < t"));
        }
        sched.check_time(s)?;
        sched.check_time(t)?;
        let (c, kappa) = match integrator {
            Integrator::Ei => match sched {
                NoiseSchedule::Vp { .. } => {
                    let half = 0.5 * (sched.alpha(t) - sched.alpha(s));
                    let v2 = sched.volatility2();
                    match direction {
                        Direction::Forward => ((-half).exp(), v2 * (-half).exp_m1()),
                        Direction::Backward => (half.exp(), v2 * half.exp_m1()),
                    }
                }
                NoiseSchedule::Ve { .. } => {
                    let lam = sched.sigma2(t) - sched.sigma2(s);
                    match direction {
                        Direction::Forward => (1.0, -0.5 * lam),
                        Direction::Backward => (1.0, 0.5 * lam),
                    }
                }
            },
            Integrator::Euler => {
                let delta = t - s;
                let tau = match (implicit, direction) {
                    (true, _) => 0.5 * (s + t),
                    (false, Direction::Forward) => s,
                    (false, Direction::Backward) => t,
                };
                let (f, g2) = (sched.drift(tau), sched.g2(tau));
                let sign = if direction == Direction::Forward { 1.0 } else { -1.0 };
                if implicit {
                    let (num, den) = (1.0 + sign * 0.5 * delta * f, 1.0 - sign * 0.5 * delta * f);
                    (num / den, -sign * 0.5 * delta * g2 / den)
                } else {
                    (1.0 + sign * delta * f, -sign * 0.5 * delta * g2)
                }
            }
        };
        Ok(Self { s, t, direction, integrator, implicit, c, kappa, sched: *sched })
    }

    /// Time at which the score is evaluated.
    pub fn eval_time(&self) -> f64 {
        match (self.implicit, self.direction) {
            (true, _) => 0.5 * (self.s + self.t),
            (false, Direction::Forward) => self.s,
            (false, Direction::Backward) => self.t,
        }
    }

    pub fn explicit<D: Density + ?Sized>(&self, x: &[f64], level: &D, out: &mut [f64]) {
        level.score(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.c * xi + self.kappa * *o;
        }
    }

    pub fn implicit<D: Density + ?Sized>(
        &self,
        x: &[f64],
        level: &D,
        max_iters: usize,
        tol: f64,
        out: &mut [f64],
    ) -> FixedPoint {
        let d = x.len();
        let mut y = x.to_vec();
        let mut z = vec![0.0; d];
        let mut sc = vec![0.0; d];
        let mut result = FixedPoint { iterations: 0, converged: false };
        for n in 1..=max_iters.max(1) {
            for j in 0..d {
                z[j] = 0.5 * (x[j] + y[j]);
            }
            level.score(&z, &mut sc);
            let mut diff2 = 0.0;
            for j in 0..d {
                let next = self.c * x[j] + self.kappa * sc[j];
                diff2 += (next - y[j]) * (next - y[j]);
                y[j] = next;
            }
            result.iterations = n;
            if diff2.sqrt() <= tol {
                result.converged = true;
                break;
            }
        }
        out.copy_from_slice(&y);
        result
    }

    /// Coefficients of log|det J| = Σ_i coef_i Tr(H^i); entry 0 is per dimension.
    pub fn series(&self, order: usize) -> Result<Vec<f64>> {
        if self.integrator == Integrator::Ei {
            let lc = logdet_coefficients(&self.sched, self.s, self.t, order)?;
            return Ok(match self.direction {
                Direction::Forward => lc.forward,
                Direction::Backward => lc.backward,
            });
        }
        self.series_from_step(order)
    }

    /// Series from the generic form J = (I − κ/2·H)⁻¹(c·I + κ/2·H).
    pub fn series_from_step(&self, order: usize) -> Result<Vec<f64>> {
        if order < 1 {
            return Err(invalid("I", "series order must be at least 1"));
        }
        let a = self.kappa / (2.0 * self.c);
        let b = self.kappa / 2.0;
        let mut out = Vec::with_capacity(order + 1);
        out.push(self.c.abs().ln());
        for i in 1..=order {
            let fi = i as f64;
            out.push((b.powi(i as i32) - (-a).powi(i as i32)) / fi);
        }
        Ok(out)
    }
}

/// Forward (a) and backward (b) series coefficients for the EI implicit maps.
#[derive(Clone, Debug, PartialEq)]
pub struct LogdetCoefficients {
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

pub fn logdet_coefficients(sched: &NoiseSchedule, s: f64, t: f64, order: usize) -> Result<LogdetCoefficients> {
    if order < 1 {
        return Err(invalid("I", "series order must be at least 1"));
    }
    let mut a = Vec::with_capacity(order + 1);
    match sched {
        NoiseSchedule::Vp { .. } => {
            let a0 = 0.5 * (sched.alpha(s) - sched.alpha(t));
            let u = a0.exp();
            let v2 = sched.volatility2();
            a.push(a0);
            for i in 1..=order {
                let ii = i as i32;
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                a.push(v2.powi(ii) / (2f64.powi(ii) * i as f64) * (u - 1.0).powi(ii) * (1.0 - sign * u.powi(-ii)));
            }
        }
        NoiseSchedule::Ve { .. } => {
            let q = 0.25 * (sched.sigma2(t) - sched.sigma2(s));
            a.push(0.0);
            for i in 1..=order {
                a.push(if i % 2 == 1 { -2.0 * q.powi(i as i32) / i as f64 } else { 0.0 });
            }
        }
    }
    let b = a.iter().map(|v| -v).collect();
    Ok(LogdetCoefficients { forward: a, backward: b })
}

/// One explicit PF-ODE step; `level` is the density at [`OdeStep::eval_time`].
pub fn explicit_ode_map<D: Density + ?Sized>(
    sched: &NoiseSchedule,
    s: f64,
    t: f64,
    direction: Direction,
    x: &[f64],
    level: &D,
    integrator: Integrator,
) -> Result<Vec<f64>> {
    let step = OdeStep::new(sched, s, t, direction, integrator, false)?;
    let mut out = vec![0.0; x.len()];
    step.explicit(x, level, &mut out);
    Ok(out)
}

/// Implicit-midpoint EI step; `level` is the density at (s + t)/2.
pub fn implicit_midpoint_map<D: Density + ?Sized>(
    sched: &NoiseSchedule,
    s: f64,
    t: f64,
    direction: Direction,
    x: &[f64],
    level: &D,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, FixedPoint)> {
    if max_iters < 1 || !(tol > 0.0) {
        return Err(invalid("max_iters", "need M ≥ 1 and ε > 0"));
    }
    let step = OdeStep::new(sched, s, t, direction, Integrator::Ei, true)?;
    let mut out = vec![0.0; x.len()];
    let fp = step.implicit(x, level, max_iters, tol, &mut out);
    Ok((out, fp))
}

/// Truncated power series for log|det ∂y/∂x| of an implicit step x ↦ y.
///
/// `mid_level` is the density at the midpoint time; the Hessian is taken at
/// (x + y)/2.
pub fn logdet_estimate<D: Density + ?Sized, R: Rng + ?Sized>(
    step: &OdeStep,
    x: &[f64],
    y: &[f64],
    order: usize,
    trace: TraceMode,
    mid_level: &D,
    rng: &mut R,
) -> Result<f64> {
    let coef = step.series(order)?;
    let d = x.len();
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut traces = vec![0.0; order + 1];
    traces[0] = d as f64;
    match trace {
        TraceMode::ExactDiag => {
            if !mid_level.has_hessian_diag() {
                return Err(Error::MissingOracle("hessian_diag"));
            }
            let mut h = vec![0.0; d];
            mid_level.hessian_diag(&z, &mut h)?;
            let mut pw = vec![1.0; d];
            for tr in traces.iter_mut().skip(1) {
                for j in 0..d {
                    pw[j] *= h[j];
                }
                *tr = pw.iter().sum();
            }
        }
        TraceMode::Hutchinson { n_probes } => {
            if n_probes < 1 {
                return Err(invalid("n_probes", "need at least one probe"));
            }
            if !mid_level.has_hessian_vp() {
                return Err(Error::MissingOracle("hessian_vp"));
            }
            let mut v = vec![0.0; d];
            let mut w = vec![0.0; d];
            let mut hw = vec![0.0; d];
            for _ in 0..n_probes {
                for vj in v.iter_mut() {
                    *vj = rng.sample(StandardNormal);
                }
                w.copy_from_slice(&v);
                for tr in traces.iter_mut().skip(1) {
                    mid_level.hessian_vp(&z, &w, &mut hw)?;
                    core::mem::swap(&mut w, &mut hw);
                    *tr += dot(&v, &w);
                }
            }
            for tr in traces.iter_mut().skip(1) {
                *tr /= n_probes as f64;
            }
        }
    }
    Ok(coef.iter().zip(&traces).map(|(c, tr)| c * tr).sum())
}
