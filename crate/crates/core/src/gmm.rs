//! Diagonal Gaussian mixtures: the analytic targets and every diffused marginal.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseSchedule;
use crate::error::{check_dim, invalid, Result};
use crate::math::{PointSet, LN_2PI};
use crate::oracle::Density;
use crate::rng::{role, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetFamily {
    /// Weights (2/3, 1/3), means ∓a·1, anisotropic diagonal covariances.
    TwoModes { a: f64 },
    /// `n_modes` isotropic modes (variance 0.5) with means drawn from U([-L, L]^d).
    ManyModes { n_modes: usize, mode_seed: u64 },
    /// A single N(0, I).
    Gaussian,
    /// Arbitrary diagonal mixture given component-wise.
    Explicit { weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub family: TargetFamily,
    pub dim: usize,
    #[serde(default = "default_true")]
    pub standardized: bool,
}

fn default_true() -> bool {
    true
}

impl TargetSpec {
    pub fn two_modes(a: f64, dim: usize) -> Self {
        Self { family: TargetFamily::TwoModes { a }, dim, standardized: true }
    }

    pub fn many_modes(n_modes: usize, dim: usize, mode_seed: u64) -> Self {
        Self { family: TargetFamily::ManyModes { n_modes, mode_seed }, dim, standardized: true }
    }

    pub fn gaussian(dim: usize) -> Self {
        Self { family: TargetFamily::Gaussian, dim, standardized: true }
    }

    pub fn unstandardized(mut self) -> Self {
        self.standardized = false;
        self
    }

    pub fn build(&self) -> Result<GaussianMixture> {
        build_target(self)
    }
}

/// Diagonal of Σ_1 for TwoModes; Σ_2 uses the same formula at index d−i.
pub fn two_modes_variance(i: usize, d: usize) -> f64 {
    let (i, d) = (i as f64, d as f64);
    (i / d) * 0.2 + ((d - i) / d) * 0.01
}

pub fn build_target(spec: &TargetSpec) -> Result<GaussianMixture> {
    let d = spec.dim;
    if d < 1 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let gmm = match &spec.family {
        TargetFamily::TwoModes { a } => {
            if !(*a > 0.0) || !a.is_finite() {
                return Err(invalid("a", "separation must be positive"));
            }
            let v1: Vec<f64> = (1..=d).map(|i| two_modes_variance(i, d)).collect();
            let v2: Vec<f64> = (1..=d).map(|i| two_modes_variance(d - i, d)).collect();
            GaussianMixture::new(
                vec![2.0 / 3.0, 1.0 / 3.0],
                vec![vec![-a; d], vec![*a; d]],
                vec![v1, v2],
            )?
        }
        TargetFamily::ManyModes { n_modes, mode_seed } => {
            let l = *n_modes;
            if l < 3 {
                return Err(invalid("n_modes", "must be at least 3"));
            }
            let ratio = 3f64.powf(1.0 / (l - 1) as f64);
            let weights: Vec<f64> = (0..l).map(|k| ratio.powi(k as i32)).collect();
            let mut rng = stream(*mode_seed, &[role::TARGET]);
            let half = l as f64;
            let means = (0..l)
                .map(|_| (0..d).map(|_| rng.random_range(-half..half)).collect())
                .collect();
            GaussianMixture::new(weights, means, vec![vec![0.5; d]; l])?
        }
        TargetFamily::Gaussian => GaussianMixture::new(vec![1.0], vec![vec![0.0; d]], vec![vec![1.0; d]])?,
        TargetFamily::Explicit { weights, means, variances } => {
            let g = GaussianMixture::new(weights.clone(), means.clone(), variances.clone())?;
            check_dim(d, g.dim())?;
            g
        }
    };
    Ok(if spec.standardized { gmm.standardize().0 } else { gmm })
}

/// Per-coordinate affine map x ↦ (x − shift) / scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    cache: Cache,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl TryFrom<RawMixture> for GaussianMixture {
    type Error = crate::Error;
    fn try_from(r: RawMixture) -> Result<Self> {
        Self::from_flat(r.dim, r.weights, r.means, r.variances)
    }
}

impl From<GaussianMixture> for RawMixture {
    fn from(g: GaussianMixture) -> Self {
        Self { dim: g.dim, weights: g.weights, means: g.means, variances: g.variances }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Cache {
    precisions: Vec<f64>,
    // log w_l − ½ Σ_j log(2π v_lj)
    log_norms: Vec<f64>,
}

const STACK: usize = 16;

impl GaussianMixture {
    /// Builds a mixture; weights must be positive and are renormalized.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let l = weights.len();
        if l == 0 {
            return Err(invalid("weights", "mixture needs at least one component"));
        }
        if means.len() != l || variances.len() != l {
            return Err(invalid("means", "one mean and one variance vector per component"));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        for (m, v) in means.iter().zip(&variances) {
            check_dim(dim, m.len())?;
            check_dim(dim, v.len())?;
        }
        Self::from_flat(dim, weights, means.concat(), variances.concat())
    }

    pub fn from_flat(dim: usize, mut weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let l = weights.len();
        check_dim(l * dim, means.len())?;
        check_dim(l * dim, variances.len())?;
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("weights", "must be strictly positive and finite"));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(invalid("variances", "must be strictly positive and finite"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(invalid("means", "must be finite"));
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mut g = Self { dim, weights, means, variances, cache: Cache::default() };
        g.refresh();
        Ok(g)
    }

    fn refresh(&mut self) {
        let d = self.dim;
        self.cache.precisions = self.variances.iter().map(|v| 1.0 / v).collect();
        self.cache.log_norms = (0..self.weights.len())
            .map(|l| {
                let lv: f64 = self.variances[l * d..(l + 1) * d].iter().map(|v| v.ln()).sum();
                self.weights[l].ln() - 0.5 * (d as f64 * LN_2PI + lv)
            })
            .collect();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, l: usize) -> &[f64] {
        &self.means[l * self.dim..(l + 1) * self.dim]
    }

    pub fn variance(&self, l: usize) -> &[f64] {
        &self.variances[l * self.dim..(l + 1) * self.dim]
    }

    /// Index of the component with the largest weight.
    pub fn strongest(&self) -> usize {
        let mut best = 0;
        for l in 1..self.weights.len() {
            if self.weights[l] > self.weights[best] {
                best = l;
            }
        }
        best
    }

    /// Exact per-coordinate mean and variance of the mixture.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut mean = vec![0.0; d];
        let mut second = vec![0.0; d];
        for (l, w) in self.weights.iter().enumerate() {
            for j in 0..d {
                let m = self.means[l * d + j];
                mean[j] += w * m;
                second[j] += w * (self.variances[l * d + j] + m * m);
            }
        }
        let var = mean.iter().zip(&second).map(|(m, s)| s - m * m).collect();
        (mean, var)
    }

    pub fn standardize(&self) -> (Self, Standardization) {
        let (shift, var) = self.moments();
        let scale: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let d = self.dim;
        let mut out = self.clone();
        for l in 0..self.weights.len() {
            for j in 0..d {
                out.means[l * d + j] = (self.means[l * d + j] - shift[j]) / scale[j];
                out.variances[l * d + j] = self.variances[l * d + j] / (scale[j] * scale[j]);
            }
        }
        out.refresh();
        (out, Standardization { shift, scale })
    }

    /// Exact marginal of the noising diffusion at time `t`.
    pub fn diffuse(&self, sched: &NoiseSchedule, t: f64) -> Result<Self> {
        sched.check_time(t)?;
        let s = sched.scale(t);
        let noise = sched.noise_var(t);
        let mut out = self.clone();
        for m in &mut out.means {
            *m *= s;
        }
        for v in &mut out.variances {
            *v = s * s * *v + noise;
        }
        out.refresh();
        Ok(out)
    }

    pub fn sample_exact<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PointSet {
        let d = self.dim;
        let mut out = PointSet::with_capacity(n, d);
        let mut x = vec![0.0; d];
        for _ in 0..n {
            let l = self.pick_component(rng.random::<f64>());
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                x[j] = self.means[l * d + j] + self.variances[l * d + j].sqrt() * z;
            }
            out.push(&x);
        }
        out
    }

    fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (l, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return l;
            }
        }
        self.weights.len() - 1
    }

    /// Index of the component mean closest to `x` in Euclidean distance.
    pub fn nearest_mean(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for l in 0..self.weights.len() {
            let d2 = crate::math::dist_sq(x, self.mean(l));
            if d2 < best.1 {
                best = (l, d2);
            }
        }
        best.0
    }

    /// Writes log w_l N(x; m_l, V_l) into `buf` and returns their log-sum-exp.
    fn component_logs(&self, x: &[f64], buf: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut max = f64::NEG_INFINITY;
        for (l, b) in buf.iter_mut().enumerate() {
            let m = &self.means[l * d..(l + 1) * d];
            let p = &self.cache.precisions[l * d..(l + 1) * d];
            let mut q = 0.0;
            for j in 0..d {
                let r = x[j] - m[j];
                q += r * r * p[j];
            }
            *b = self.cache.log_norms[l] - 0.5 * q;
            max = max.max(*b);
        }
        let mut sum = 0.0;
        for b in buf.iter() {
            sum += (b - max).exp();
        }
        max + sum.ln()
    }

    fn with_responsibilities<T>(&self, x: &[f64], f: impl FnOnce(f64, &[f64]) -> T) -> T {
        let l = self.weights.len();
        let mut stack = [0.0; STACK];
        let mut heap;
        let buf: &mut [f64] = if l <= STACK {
            &mut stack[..l]
        } else {
            heap = vec![0.0; l];
            &mut heap
        };
        let lse = self.component_logs(x, buf);
        for b in buf.iter_mut() {
            *b = (*b - lse).exp();
        }
        f(lse, buf)
    }

    fn score_from(&self, x: &[f64], resp: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for (l, r) in resp.iter().enumerate() {
            if *r == 0.0 {
                continue;
            }
            let m = &self.means[l * d..(l + 1) * d];
            let p = &self.cache.precisions[l * d..(l + 1) * d];
            for j in 0..d {
                out[j] -= r * (x[j] - m[j]) * p[j];
            }
        }
    }

    pub fn try_log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(Density::log_density(self, x))
    }

    pub fn try_score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        Density::score(self, x, &mut out);
        Ok(out)
    }

    pub fn try_hessian_diag(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        Density::hessian_diag(self, x, &mut out)?;
        Ok(out)
    }

    pub fn try_hessian_vp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, v.len())?;
        let mut out = vec![0.0; self.dim];
        Density::hessian_vp(self, x, v, &mut out)?;
        Ok(out)
    }
}

impl Density for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let l = self.weights.len();
        let mut stack = [0.0; STACK];
        if l <= STACK {
            self.component_logs(x, &mut stack[..l])
        } else {
            self.component_logs(x, &mut vec![0.0; l])
        }
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.with_responsibilities(x, |_, r| self.score_from(x, r, out));
    }

    fn log_density_and_score(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.with_responsibilities(x, |lse, r| {
            self.score_from(x, r, out);
            lse
        })
    }

    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim;
        self.with_responsibilities(x, |_, resp| {
            // H_jj = Σ_l r_l (g_lj² − P_lj) − s_j², g_l = −P_l (x − m_l)
            let mut s = vec![0.0; d];
            out.fill(0.0);
            for (l, r) in resp.iter().enumerate() {
                if *r == 0.0 {
                    continue;
                }
                let m = &self.means[l * d..(l + 1) * d];
                let p = &self.cache.precisions[l * d..(l + 1) * d];
                for j in 0..d {
                    let g = -(x[j] - m[j]) * p[j];
                    s[j] += r * g;
                    out[j] += r * (g * g - p[j]);
                }
            }
            for j in 0..d {
                out[j] -= s[j] * s[j];
            }
        });
        Ok(())
    }

    fn hessian_vp(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim;
        self.with_responsibilities(x, |_, resp| {
            // H v = Σ_l r_l (g_l (g_l·v) − P_l v) − s (s·v)
            let mut s = vec![0.0; d];
            let mut g = vec![0.0; d];
            out.fill(0.0);
            for (l, r) in resp.iter().enumerate() {
                if *r == 0.0 {
                    continue;
                }
                let m = &self.means[l * d..(l + 1) * d];
                let p = &self.cache.precisions[l * d..(l + 1) * d];
                let mut gv = 0.0;
                for j in 0..d {
                    g[j] = -(x[j] - m[j]) * p[j];
                    gv += g[j] * v[j];
                }
                for j in 0..d {
                    s[j] += r * g[j];
                    out[j] += r * (g[j] * gv - p[j] * v[j]);
                }
            }
            let sv = crate::math::dot(&s, v);
            for j in 0..d {
                out[j] -= s[j] * sv;
            }
        });
        Ok(())
    }

    fn has_hessian_diag(&self) -> bool {
        true
    }

    fn has_hessian_vp(&self) -> bool {
        true
    }
}
