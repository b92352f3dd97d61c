use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_SIGMA_MIN_GRID: f64 = 1e-2;

/// Noising SDE dX = f(t) X dt + g(t) dW.
///
/// For VP, `alpha(t)` is the integrated rate ∫β and S(t) = exp(−α/2). The
/// noise level σ(t) follows σ²(t) = ∫ g²/S², so the marginal noise standard
/// deviation is S(t)·σ(t) (see [`NoiseSchedule::noise_std`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSchedule {
    Vp { beta_min: f64, beta_max: f64, horizon: f64, volatility: f64 },
    Ve { sigma_min: f64, sigma_max: f64 },
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::Vp { beta_min: 0.1, beta_max: 20.0, horizon: 1.0, volatility: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleCoeffs {
    pub scale: f64,
    pub sigma: f64,
    pub drift: f64,
    pub g2: f64,
    pub alpha: f64,
}

impl NoiseSchedule {
    pub fn ve_default() -> Self {
        Self::Ve { sigma_min: 0.01, sigma_max: 100.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Vp { beta_min, beta_max, horizon, volatility } => {
                if !(beta_min > 0.0 && beta_max > beta_min && beta_max.is_finite()) {
                    return Err(invalid("beta", "need 0 < beta_min < beta_max"));
                }
                if !(horizon > 0.0 && horizon.is_finite()) {
                    return Err(invalid("horizon", "must be positive"));
                }
                if !(volatility > 0.0 && volatility.is_finite()) {
                    return Err(invalid("volatility", "must be positive"));
                }
            }
            Self::Ve { sigma_min, sigma_max } => {
                if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
                    return Err(invalid("sigma", "need 0 < sigma_min < sigma_max"));
                }
            }
        }
        Ok(())
    }

    /// End time T. For VE this is σ⁻¹(sigma_max) so that σ(T) = sigma_max.
    pub fn horizon(&self) -> f64 {
        match *self {
            Self::Vp { horizon, .. } => horizon,
            Self::Ve { sigma_min, sigma_max } => {
                let r = sigma_max / sigma_min;
                (r * r + 1.0).ln() / (2.0 * r.ln())
            }
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let h = self.horizon();
        if (0.0..=h).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, horizon: h })
        }
    }

    /// VP rate β(t) = g²(t)/volatility²; VE returns g²(t).
    pub fn beta(&self, t: f64) -> f64 {
        match *self {
            Self::Vp { beta_min, beta_max, horizon, .. } => beta_min + (beta_max - beta_min) * t / horizon,
            Self::Ve { .. } => self.g2(t),
        }
    }

    /// VP: α_t = ∫₀ᵗ β. VE: σ²(t).
    pub fn alpha(&self, t: f64) -> f64 {
        match *self {
            Self::Vp { beta_min, beta_max, horizon, .. } => beta_min * t + (beta_max - beta_min) * t * t / (2.0 * horizon),
            Self::Ve { .. } => self.sigma2(t),
        }
    }

    pub fn scale(&self, t: f64) -> f64 {
        match self {
            Self::Vp { .. } => (-0.5 * self.alpha(t)).exp(),
            Self::Ve { .. } => 1.0,
        }
    }

    pub fn sigma2(&self, t: f64) -> f64 {
        match *self {
            Self::Vp { volatility, .. } => volatility * volatility * self.alpha(t).exp_m1(),
            Self::Ve { sigma_min, sigma_max } => {
                let lr = (sigma_max / sigma_min).ln();
                sigma_min * sigma_min * (2.0 * t * lr).exp_m1()
            }
        }
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma2(t).sqrt()
    }

    /// Variance of the noise in X_t | X_0, i.e. S(t)²σ(t)².
    pub fn noise_var(&self, t: f64) -> f64 {
        match *self {
            Self::Vp { volatility, .. } => -volatility * volatility * (-self.alpha(t)).exp_m1(),
            Self::Ve { .. } => self.sigma2(t),
        }
    }

    pub fn noise_std(&self, t: f64) -> f64 {
        self.noise_var(t).sqrt()
    }

    pub fn drift(&self, t: f64) -> f64 {
        match self {
            Self::Vp { .. } => -0.5 * self.beta(t),
            Self::Ve { .. } => 0.0,
        }
    }

    pub fn g2(&self, t: f64) -> f64 {
        match *self {
            Self::Vp { volatility, .. } => volatility * volatility * self.beta(t),
            Self::Ve { sigma_min, sigma_max } => {
                let lr = (sigma_max / sigma_min).ln();
                sigma_min * sigma_min * (2.0 * t * lr).exp() * 2.0 * lr
            }
        }
    }

    /// Squared volatility σ² of the VP parametrization (1 for VE).
    pub fn volatility2(&self) -> f64 {
        match *self {
            Self::Vp { volatility, .. } => volatility * volatility,
            Self::Ve { .. } => 1.0,
        }
    }

    pub fn coeffs(&self, t: f64) -> Result<ScheduleCoeffs> {
        self.check_time(t)?;
        Ok(ScheduleCoeffs {
            scale: self.scale(t),
            sigma: self.sigma(t),
            drift: self.drift(t),
            g2: self.g2(t),
            alpha: self.alpha(t),
        })
    }

    /// Solves σ(t) = sigma for t.
    pub fn inverse_sigma(&self, sigma: f64) -> Result<f64> {
        let top = self.sigma(self.horizon());
        if !(sigma > 0.0) || sigma > top * (1.0 + 1e-12) {
            return Err(invalid("sigma", "outside (0, σ(T)]"));
        }
        match *self {
            Self::Ve { sigma_min, sigma_max } => {
                let r = sigma / sigma_min;
                Ok(((r * r + 1.0).ln() / (2.0 * (sigma_max / sigma_min).ln())).min(self.horizon()))
            }
            Self::Vp { .. } => {
                let target = sigma * sigma;
                let (mut lo, mut hi) = (0.0, self.horizon());
                // Runs to machine precision, well inside the 1e-12 requirement.
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.sigma2(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = if (self.sigma2(hi) - target).abs() < (self.sigma2(lo) - target).abs() { hi } else { lo };
                Ok(t)
            }
        }
    }
}

/// Times t_0 < … < t_K with σ(t_k) geometric between the two grid bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl TimeGrid {
    pub fn k(&self) -> usize {
        self.times.len() - 1
    }

    /// Grid with σ_min = 1e-2 and σ_max = σ(T).
    pub fn log_snr(sched: &NoiseSchedule, k: usize) -> Result<Self> {
        make_time_grid(sched, k, DEFAULT_SIGMA_MIN_GRID, sched.sigma(sched.horizon()))
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.times[k] + self.times[k + 1])
    }
}

pub fn make_time_grid(sched: &NoiseSchedule, k: usize, sigma_min: f64, sigma_max: f64) -> Result<TimeGrid> {
    sched.validate()?;
    if k < 1 {
        return Err(invalid("K", "need at least one step"));
    }
    if !(sigma_min > 0.0 && sigma_max > sigma_min) {
        return Err(invalid("sigma_min_grid", "need 0 < sigma_min_grid < sigma_max_grid"));
    }
    let top = sched.sigma(sched.horizon());
    if sigma_max > top * (1.0 + 1e-12) {
        return Err(invalid("sigma_max_grid", "exceeds σ(T)"));
    }
    let ratio = sigma_max / sigma_min;
    let mut times = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let s = if i == k { sigma_max } else { sigma_min * ratio.powf(i as f64 / k as f64) };
        times.push(sched.inverse_sigma(s)?);
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("K", "grid is not strictly increasing; reduce K or widen the bounds"));
    }
    Ok(TimeGrid { times, sigma_min, sigma_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vp_closed_forms_at_one() {
        let s = NoiseSchedule::default();
        let c = s.coeffs(1.0).unwrap();
        assert!((c.alpha - 10.05).abs() < 1e-12);
        assert!((c.scale - (-5.025f64).exp()).abs() < 1e-15);
        assert!((s.noise_var(1.0) - (1.0 - (-10.05f64).exp())).abs() < 1e-14);
        assert!((c.drift + 10.0).abs() < 1e-12);
        assert!((c.g2 - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_noise_free() {
        for s in [NoiseSchedule::default(), NoiseSchedule::ve_default()] {
            let c = s.coeffs(0.0).unwrap();
            assert_eq!(c.scale, 1.0);
            assert_eq!(c.sigma, 0.0);
            if let NoiseSchedule::Vp { .. } = s {
                assert_eq!(c.alpha, 0.0);
            }
        }
    }

    #[test]
    fn ve_scale_is_one_and_sigma_hits_max() {
        let s = NoiseSchedule::ve_default();
        for t in [0.0, 0.3, 0.9, s.horizon()] {
            assert_eq!(s.scale(t), 1.0);
        }
        assert!((s.sigma(s.horizon()) / 100.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_time_is_an_error() {
        let s = NoiseSchedule::default();
        assert!(s.coeffs(1.5).is_err());
        assert!(s.coeffs(-0.1).is_err());
    }

    #[test]
    fn grid_endpoints_for_k_one() {
        let s = NoiseSchedule::default();
        let g = make_time_grid(&s, 1, 0.05, 3.0).unwrap();
        assert_eq!(g.times.len(), 2);
        assert!((s.sigma(g.times[0]) - 0.05).abs() < 1e-12);
        assert!((s.sigma(g.times[1]) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        let s = NoiseSchedule::default();
        assert!(make_time_grid(&s, 4, 0.1, 1e6).is_err());
        assert!(make_time_grid(&s, 4, 1.0, 0.5).is_err());
        assert!(make_time_grid(&s, 0, 0.1, 1.0).is_err());
    }
}
