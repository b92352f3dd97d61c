//! The per-level density interface consumed by kernels, maps and samplers.

use crate::error::{Error, Result};
use crate::math::std_normal_log_pdf;

/// A (possibly unnormalized) log-density with its derivative oracles.
///
/// Callers are responsible for passing slices of length `dim()`.
pub trait Density {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn score(&self, x: &[f64], out: &mut [f64]);

    fn log_density_and_score(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.score(x, out);
        self.log_density(x)
    }

    fn hessian_diag(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingOracle("hessian_diag"))
    }

    fn hessian_vp(&self, _x: &[f64], _v: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingOracle("hessian_vp"))
    }

    fn has_hessian_diag(&self) -> bool {
        false
    }

    fn has_hessian_vp(&self) -> bool {
        false
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn score(&self, x: &[f64], out: &mut [f64]) {
        (**self).score(x, out)
    }
    fn log_density_and_score(&self, x: &[f64], out: &mut [f64]) -> f64 {
        (**self).log_density_and_score(x, out)
    }
    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).hessian_diag(x, out)
    }
    fn hessian_vp(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).hessian_vp(x, v, out)
    }
    fn has_hessian_diag(&self) -> bool {
        (**self).has_hessian_diag()
    }
    fn has_hessian_vp(&self) -> bool {
        (**self).has_hessian_vp()
    }
}

/// The base density N(0, I).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdNormal {
    pub dim: usize,
}

impl Density for StdNormal {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        std_normal_log_pdf(x)
    }
    fn score(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -xi;
        }
    }
    fn hessian_diag(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(-1.0);
        Ok(())
    }
    fn hessian_vp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = -vi;
        }
        Ok(())
    }
    fn has_hessian_diag(&self) -> bool {
        true
    }
    fn has_hessian_vp(&self) -> bool {
        true
    }
}

/// Wraps a density and hides its Hessian oracles.
#[derive(Clone, Copy, Debug)]
pub struct ScoreOnly<D>(pub D);

impl<D: Density> Density for ScoreOnly<D> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x)
    }
    fn score(&self, x: &[f64], out: &mut [f64]) {
        self.0.score(x, out)
    }
    fn log_density_and_score(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.0.log_density_and_score(x, out)
    }
}
