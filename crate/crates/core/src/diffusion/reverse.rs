use alloc::vec;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{denoising_kernel_first_order, Direction, Integrator, NoiseSchedule, OdeStep, TimeGrid};
use crate::error::{check_dim, invalid, Result};
use crate::math::PointSet;
use crate::oracle::Density;

fn check_levels<D: Density>(grid: &TimeGrid, levels: &[D]) -> Result<usize> {
    if levels.len() != grid.times.len() {
        return Err(invalid("levels", "need one density per grid time"));
    }
    let d = levels[0].dim();
    for l in levels {
        check_dim(d, l.dim())?;
    }
    Ok(d)
}

/// Chains first-order EI denoising kernels from t_K down to t_0, starting at N(0, I).
///
/// `levels[k]` is the density at `grid.times[k]`.
pub fn reverse_sde_simulate<D: Density, R: Rng + ?Sized>(
    sched: &NoiseSchedule,
    grid: &TimeGrid,
    levels: &[D],
    n: usize,
    rng: &mut R,
) -> Result<PointSet> {
    let d = check_levels(grid, levels)?;
    let mut out = PointSet::with_capacity(n, d);
    let mut x = vec![0.0; d];
    let mut sc = vec![0.0; d];
    for _ in 0..n {
        for xi in x.iter_mut() {
            *xi = rng.sample(StandardNormal);
        }
        for k in (0..grid.k()).rev() {
            levels[k + 1].score(&x, &mut sc);
            let kern =
                denoising_kernel_first_order(sched, grid.times[k], grid.times[k + 1], &x, &sc, Integrator::Ei)?;
            kern.sample(rng, &mut x);
        }
        out.push(&x);
    }
    Ok(out)
}

/// Chains explicit EI backward PF-ODE steps from t_K down to t_0, starting at N(0, I).
pub fn reverse_ode_simulate<D: Density, R: Rng + ?Sized>(
    sched: &NoiseSchedule,
    grid: &TimeGrid,
    levels: &[D],
    n: usize,
    rng: &mut R,
) -> Result<PointSet> {
    let d = check_levels(grid, levels)?;
    let steps = (0..grid.k())
        .map(|k| OdeStep::new(sched, grid.times[k], grid.times[k + 1], Direction::Backward, Integrator::Ei, false))
        .collect::<Result<alloc::vec::Vec<_>>>()?;
    let mut out = PointSet::with_capacity(n, d);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for _ in 0..n {
        for xi in x.iter_mut() {
            *xi = rng.sample(StandardNormal);
        }
        for k in (0..grid.k()).rev() {
            steps[k].explicit(&x, &levels[k + 1], &mut y);
            core::mem::swap(&mut x, &mut y);
        }
        out.push(&x);
    }
    Ok(out)
}
