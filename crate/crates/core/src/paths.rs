//! Annealing paths: K+1 levels from the target (level 0) to N(0, I) (level K).

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::diffusion::{NoiseSchedule, TimeGrid};
use crate::error::{check_dim, invalid, Result};
use crate::gmm::GaussianMixture;
use crate::math::std_normal_log_pdf;
use crate::oracle::Density;

/// Geometric interpolation β·log π + (1 − β)·log N(0, I).
#[derive(Clone, Debug)]
pub struct Tempered {
    pub beta: f64,
    pub target: Arc<GaussianMixture>,
}

impl Density for Tempered {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let base = std_normal_log_pdf(x);
        if self.beta == 0.0 {
            return base;
        }
        if self.beta == 1.0 {
            return self.target.log_density(x);
        }
        self.beta * self.target.log_density(x) + (1.0 - self.beta) * base
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        self.log_density_and_score(x, out);
    }

    fn log_density_and_score(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let base = std_normal_log_pdf(x);
        let lt = if self.beta == 0.0 {
            out.fill(0.0);
            0.0
        } else {
            self.target.log_density_and_score(x, out)
        };
        let b = self.beta;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = b * *o - (1.0 - b) * xi;
        }
        if b == 0.0 {
            base
        } else if b == 1.0 {
            lt
        } else {
            b * lt + (1.0 - b) * base
        }
    }

    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.target.hessian_diag(x, out)?;
        let b = self.beta;
        for o in out.iter_mut() {
            *o = b * *o - (1.0 - b);
        }
        Ok(())
    }

    fn hessian_vp(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        self.target.hessian_vp(x, v, out)?;
        let b = self.beta;
        for (o, vi) in out.iter_mut().zip(v) {
            *o = b * *o - (1.0 - b) * vi;
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

#[derive(Clone, Debug)]
pub enum Level {
    Mixture(GaussianMixture),
    Tempered(Tempered),
}

macro_rules! dispatch {
    ($self:ident, $l:ident => $e:expr) => {
        match $self {
            Level::Mixture($l) => $e,
            Level::Tempered($l) => $e,
        }
    };
}

impl Density for Level {
    fn dim(&self) -> usize {
        dispatch!(self, l => l.dim())
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        dispatch!(self, l => l.log_density(x))
    }
    fn score(&self, x: &[f64], out: &mut [f64]) {
        dispatch!(self, l => l.score(x, out))
    }
    fn log_density_and_score(&self, x: &[f64], out: &mut [f64]) -> f64 {
        dispatch!(self, l => l.log_density_and_score(x, out))
    }
    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        dispatch!(self, l => l.hessian_diag(x, out))
    }
    fn hessian_vp(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        dispatch!(self, l => l.hessian_vp(x, v, out))
    }
    fn has_hessian_diag(&self) -> bool {
        true
    }
    fn has_hessian_vp(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug)]
pub enum PathKind {
    Tempering { epsilon: f64, betas: Vec<f64> },
    Diffusion { schedule: NoiseSchedule, grid: TimeGrid, midpoints: Vec<GaussianMixture> },
}

#[derive(Clone, Debug)]
pub struct DensityPath {
    pub kind: PathKind,
    levels: Vec<Level>,
    target: Arc<GaussianMixture>,
}

/// β_k = 1 − ε^{(K−k)/K} for k ≥ 1 and β_0 = 1.
pub fn tempering_betas(k: usize, epsilon: f64) -> Vec<f64> {
    (0..=k)
        .map(|i| if i == 0 { 1.0 } else { 1.0 - epsilon.powf((k - i) as f64 / k as f64) })
        .collect()
}

pub fn tempering_path(target: &GaussianMixture, k: usize, epsilon: f64) -> Result<DensityPath> {
    if k < 1 {
        return Err(invalid("K", "need at least one step"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1)"));
    }
    let target = Arc::new(target.clone());
    let betas = tempering_betas(k, epsilon);
    let levels = betas.iter().map(|&beta| Level::Tempered(Tempered { beta, target: target.clone() })).collect();
    Ok(DensityPath { kind: PathKind::Tempering { epsilon, betas }, levels, target })
}

/// Level k is the exact marginal at `grid.times[k]`.
pub fn diffusion_path(target: &GaussianMixture, sched: &NoiseSchedule, grid: &TimeGrid) -> Result<DensityPath> {
    sched.validate()?;
    if grid.times.len() < 2 {
        return Err(invalid("grid", "need at least two times"));
    }
    for &t in &grid.times {
        sched.check_time(t).map_err(|_| invalid("grid", "time outside the schedule horizon"))?;
    }
    if grid.times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("grid", "times must be strictly increasing"));
    }
    let levels = grid.times.iter().map(|&t| target.diffuse(sched, t).map(Level::Mixture)).collect::<Result<_>>()?;
    let midpoints = (0..grid.k()).map(|k| target.diffuse(sched, grid.midpoint(k))).collect::<Result<_>>()?;
    Ok(DensityPath {
        kind: PathKind::Diffusion { schedule: *sched, grid: grid.clone(), midpoints },
        levels,
        target: Arc::new(target.clone()),
    })
}

impl DensityPath {
    /// Number of steps K (there are K + 1 levels).
    pub fn k(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn target(&self) -> &GaussianMixture {
        &self.target
    }

    pub fn is_diffusion(&self) -> bool {
        matches!(self.kind, PathKind::Diffusion { .. })
    }

    /// β for tempering levels, t for diffusion levels.
    pub fn level_param(&self, k: usize) -> f64 {
        match &self.kind {
            PathKind::Tempering { betas, .. } => betas[k],
            PathKind::Diffusion { grid, .. } => grid.times[k],
        }
    }

    /// Density at the midpoint time between levels k and k + 1 (diffusion only).
    pub fn midpoint(&self, k: usize) -> Option<&GaussianMixture> {
        match &self.kind {
            PathKind::Diffusion { midpoints, .. } => Some(&midpoints[k]),
            PathKind::Tempering { .. } => None,
        }
    }

    pub fn schedule(&self) -> Option<(&NoiseSchedule, &TimeGrid)> {
        match &self.kind {
            PathKind::Diffusion { schedule, grid, .. } => Some((schedule, grid)),
            PathKind::Tempering { .. } => None,
        }
    }
}

/// Trapezoid weights on a sorted grid.
fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Per level, the share of mass carried by the strongest target mode.
///
/// Diffusion levels are mixtures with the target's weights, so the strongest
/// component is integrated directly. Tempering levels have no component
/// structure; their mass is split at the target's density minimum between the
/// two heaviest modes.
pub fn path_mode_mass_profile_1d(path: &DensityPath, x_grid: &[f64]) -> Result<Vec<f64>> {
    check_dim(1, path.dim())?;
    if x_grid.len() < 3 || x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("x_grid", "need an increasing grid of at least 3 points"));
    }
    let target = path.target();
    let strong = target.strongest();
    let split = basin_split(target, x_grid);
    let strong_left = target.mean(strong)[0] < x_grid[split];
    let mut out = Vec::with_capacity(path.k() + 1);
    let mut dens = vec![0.0; x_grid.len()];
    let mut part = vec![0.0; x_grid.len()];
    for level in path.levels() {
        match level {
            Level::Mixture(g) => {
                let (w, m, v) = (g.weights()[strong], g.mean(strong)[0], g.variance(strong)[0]);
                for (i, &x) in x_grid.iter().enumerate() {
                    dens[i] = g.log_density(&[x]).exp();
                    part[i] = w * (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * core::f64::consts::PI * v).sqrt();
                }
                out.push(trapezoid(x_grid, &part) / trapezoid(x_grid, &dens));
            }
            Level::Tempered(t) => {
                let logs: Vec<f64> = x_grid.iter().map(|&x| t.log_density(&[x])).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (d, l) in dens.iter_mut().zip(&logs) {
                    *d = (l - max).exp();
                }
                let total = trapezoid(x_grid, &dens);
                let left = trapezoid(&x_grid[..=split], &dens[..=split]);
                out.push(if strong_left { left / total } else { 1.0 - left / total });
            }
        }
    }
    Ok(out)
}

/// Index of the grid point of minimal target density between the two heaviest modes.
fn basin_split(target: &GaussianMixture, x_grid: &[f64]) -> usize {
    let mut order: Vec<usize> = (0..target.n_components()).collect();
    order.sort_by(|a, b| target.weights()[*b].total_cmp(&target.weights()[*a]));
    if order.len() < 2 {
        return x_grid.len() - 1;
    }
    let (m1, m2) = (target.mean(order[0])[0], target.mean(order[1])[0]);
    let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
    let mut best = (x_grid.partition_point(|&x| x < 0.5 * (lo + hi)).min(x_grid.len() - 1), f64::INFINITY);
    for (i, &x) in x_grid.iter().enumerate().filter(|(_, &x)| x > lo && x < hi) {
        let l = target.log_density(&[x]);
        if l < best.1 {
            best = (i, l);
        }
    }
    best.0
}
