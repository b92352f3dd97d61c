use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::NoiseSchedule;
use crate::error::{invalid, Error, Result};
use crate::math::{diag_normal_log_pdf, iso_normal_log_pdf};

/// Discretization of the reverse dynamics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exponential integrator.
    #[default]
    Ei,
    /// Euler / Euler–Maruyama.
    Euler,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Variance {
    Iso(f64),
    Diag(Vec<f64>),
}

/// A Gaussian N(mean, variance) already conditioned on its input point.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    pub mean: Vec<f64>,
    pub variance: Variance,
}

impl GaussianKernel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.variance {
            Variance::Iso(v) => {
                let sd = v.sqrt();
                for (o, m) in out.iter_mut().zip(&self.mean) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + sd * z;
                }
            }
            Variance::Diag(v) => {
                for ((o, m), vi) in out.iter_mut().zip(&self.mean).zip(v) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + vi.sqrt() * z;
                }
            }
        }
    }

    pub fn log_pdf(&self, y: &[f64]) -> f64 {
        match &self.variance {
            Variance::Iso(v) => iso_normal_log_pdf(y, &self.mean, *v),
            Variance::Diag(v) => diag_normal_log_pdf(y, &self.mean, v),
        }
    }
}

/// Exact forward transition X_t | X_s = x ~ N(mean_coeff·x, variance·I).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisingKernel {
    pub mean_coeff: f64,
    pub variance: f64,
}

fn check_order(s: f64, t: f64) -> Result<()> {
    if s < t {
        Ok(())
    } else {
        Err(invalid("s", "kernel needs s < t"))
    }
}

/// α_t − α_s for VP, σ²(t) − σ²(s) for VE.
fn gap(sched: &NoiseSchedule, s: f64, t: f64) -> f64 {
    match sched {
        NoiseSchedule::Vp { .. } => sched.alpha(t) - sched.alpha(s),
        NoiseSchedule::Ve { .. } => sched.sigma2(t) - sched.sigma2(s),
    }
}

impl NoisingKernel {
    pub fn new(sched: &NoiseSchedule, s: f64, t: f64) -> Result<Self> {
        check_order(s, t)?;
        sched.check_time(s)?;
        sched.check_time(t)?;
        let g = gap(sched, s, t);
        Ok(match sched {
            NoiseSchedule::Vp { .. } => {
                Self { mean_coeff: (-0.5 * g).exp(), variance: -sched.volatility2() * (-g).exp_m1() }
            }
            NoiseSchedule::Ve { .. } => Self { mean_coeff: 1.0, variance: g },
        })
    }

    pub fn at(&self, x_s: &[f64]) -> GaussianKernel {
        GaussianKernel { mean: x_s.iter().map(|x| self.mean_coeff * x).collect(), variance: Variance::Iso(self.variance) }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x_s: &[f64], rng: &mut R, out: &mut [f64]) {
        let sd = self.variance.sqrt();
        for (o, x) in out.iter_mut().zip(x_s) {
            let z: f64 = rng.sample(StandardNormal);
            *o = self.mean_coeff * x + sd * z;
        }
    }

    pub fn log_pdf(&self, x_t: &[f64], x_s: &[f64]) -> f64 {
        let d = x_t.len() as f64;
        let mut q = 0.0;
        for (a, b) in x_t.iter().zip(x_s) {
            let r = a - self.mean_coeff * b;
            q += r * r;
        }
        -0.5 * (d * (crate::math::LN_2PI + self.variance.ln()) + q / self.variance)
    }
}

/// First-order Gaussian approximation of X_s | X_t = x_t from the score at x_t.
pub fn denoising_kernel_first_order(
    sched: &NoiseSchedule,
    s: f64,
    t: f64,
    x_t: &[f64],
    score: &[f64],
    integrator: Integrator,
) -> Result<GaussianKernel> {
    check_order(s, t)?;
    sched.check_time(s)?;
    sched.check_time(t)?;
    let (mean, var) = match (integrator, sched) {
        (Integrator::Ei, NoiseSchedule::Vp { .. }) => {
            let g = gap(sched, s, t);
            let c = (0.5 * g).exp();
            let v2 = sched.volatility2();
            let k = 2.0 * v2 * (0.5 * g).exp_m1();
            let mean = x_t.iter().zip(score).map(|(x, sc)| c * x + k * sc).collect();
            (mean, v2 * g.exp_m1())
        }
        (Integrator::Ei, NoiseSchedule::Ve { .. }) => {
            let lam = gap(sched, s, t);
            (x_t.iter().zip(score).map(|(x, sc)| x + lam * sc).collect(), lam)
        }
        (Integrator::Euler, _) => {
            let delta = t - s;
            let (f, g2) = (sched.drift(t), sched.g2(t));
            let mean = x_t.iter().zip(score).map(|(x, sc)| x + delta * (-f * x + g2 * sc)).collect();
            (mean, g2 * delta)
        }
    };
    Ok(GaussianKernel { mean, variance: Variance::Iso(var) })
}

/// Skip-step DDPM kernel from the score and Hessian diagonal at x_t.
pub fn denoising_kernel_second_order(
    sched: &NoiseSchedule,
    s: f64,
    t: f64,
    x_t: &[f64],
    score: &[f64],
    hess_diag: &[f64],
) -> Result<GaussianKernel> {
    let fwd = NoisingKernel::new(sched, s, t)?;
    let (a, s2) = (fwd.mean_coeff, fwd.variance);
    let mean = x_t.iter().zip(score).map(|(x, sc)| (x + s2 * sc) / a).collect();
    let var: Vec<f64> = hess_diag.iter().map(|h| s2 * (1.0 + s2 * h) / (a * a)).collect();
    let min = var.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositiveVariance { min });
    }
    Ok(GaussianKernel { mean, variance: Variance::Diag(var) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vp_noising_matches_lambda_form() {
        let s = NoiseSchedule::default();
        let k = NoisingKernel::new(&s, 0.0, 1.0).unwrap();
        let lam_f = 1.0 - (-10.05f64).exp();
        assert!((k.variance - lam_f).abs() < 1e-14);
        assert!((k.mean_coeff - (-5.025f64).exp()).abs() < 1e-16);
        assert!((k.mean_coeff - (1.0 - lam_f).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_gap_degenerates_to_identity() {
        let s = NoiseSchedule::default();
        let k = NoisingKernel::new(&s, 0.3, 0.3 + 1e-12).unwrap();
        assert!((k.mean_coeff - 1.0).abs() < 1e-10 && k.variance < 1e-10);
        let x = [0.7, -0.2];
        let b = denoising_kernel_first_order(&s, 0.3, 0.3 + 1e-12, &x, &[1.0, 1.0], Integrator::Ei).unwrap();
        assert!((b.mean[0] - 0.7).abs() < 1e-10);
        let d = denoising_kernel_second_order(&s, 0.3, 0.3 + 1e-12, &x, &[1.0, 1.0], &[-1.0, -1.0]).unwrap();
        assert!((d.mean[1] + 0.2).abs() < 1e-10);
    }

    #[test]
    fn reversed_times_are_rejected() {
        let s = NoiseSchedule::default();
        assert!(NoisingKernel::new(&s, 0.5, 0.5).is_err());
        assert!(denoising_kernel_first_order(&s, 0.6, 0.5, &[0.0], &[0.0], Integrator::Ei).is_err());
    }

    #[test]
    fn first_order_standard_normal_mean() {
        let s = NoiseSchedule::default();
        let (a, b) = (0.2, 0.4);
        let lam_b = (s.alpha(b) - s.alpha(a)).exp() - 1.0;
        let x = [1.3];
        let k = denoising_kernel_first_order(&s, a, b, &x, &[-1.3], Integrator::Ei).unwrap();
        assert!((k.mean[0] - 1.3 * (2.0 - (1.0 + lam_b).sqrt())).abs() < 1e-12);
        assert_eq!(k.variance, Variance::Iso(lam_b));
    }

    #[test]
    fn ve_first_order_form() {
        let s = NoiseSchedule::ve_default();
        let lam = s.sigma2(0.7) - s.sigma2(0.5);
        let k = denoising_kernel_first_order(&s, 0.5, 0.7, &[2.0], &[0.5], Integrator::Ei).unwrap();
        assert!((k.mean[0] - (2.0 + lam * 0.5)).abs() < 1e-12);
        assert_eq!(k.variance, Variance::Iso(lam));
    }

    #[test]
    fn ddpm_rejects_nonpositive_covariance() {
        let s = NoiseSchedule::default();
        let r = denoising_kernel_second_order(&s, 0.1, 0.9, &[0.0], &[0.0], &[-1e6]);
        assert!(matches!(r, Err(Error::NonPositiveVariance { .. })));
    }
}
