//! Sample-quality metrics against an exact target.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::gmm::GaussianMixture;
use crate::math::{dot, log_sum_exp, PointSet};
use crate::rng::{role, stream};
use crate::samplers::WeightedSamples;

pub const DEFAULT_PROJECTIONS: usize = 128;

/// Normalized ESS, (Σw)²/(N·Σw²), computed in log space.
pub fn ess_fraction(log_weights: &[f64]) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(Error::Empty);
    }
    let a = log_sum_exp(log_weights);
    if a == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    let doubled: Vec<f64> = log_weights.iter().map(|l| 2.0 * l).collect();
    let b = log_sum_exp(&doubled);
    Ok((2.0 * a - b - (log_weights.len() as f64).ln()).exp())
}

fn normalize(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(w) => {
            check_dim(n, w.len())?;
            let s: f64 = w.iter().sum();
            if !(s > 0.0) || w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(invalid("weights", "must be non-negative with positive sum"));
            }
            Ok(w.iter().map(|v| v / s).collect())
        }
    }
}

/// Squared W2 between two weighted 1-D distributions by quantile matching.
fn w2_sq_1d(a: &mut [(f64, f64)], b: &mut [(f64, f64)]) -> f64 {
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    let cumulate = |v: &[(f64, f64)]| {
        let mut c = 0.0;
        let mut out: Vec<f64> = v.iter().map(|p| {
            c += p.1;
            c
        }).collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    };
    let (ca, cb) = (cumulate(a), cumulate(b));
    let (mut i, mut j, mut prev, mut acc) = (0, 0, 0.0, 0.0);
    while i < a.len() && j < b.len() {
        let next = ca[i].min(cb[j]);
        let diff = a[i].0 - b[j].0;
        acc += (next - prev) * diff * diff;
        prev = next;
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    acc
}

/// Sliced Wasserstein-2: root mean squared 1-D W2 over random unit directions.
///
/// `x_weights` are optional non-negative weights for `x` (normalized here).
pub fn sliced_wasserstein<R: Rng + ?Sized>(
    x: &PointSet,
    x_weights: Option<&[f64]>,
    y: &PointSet,
    n_projections: usize,
    rng: &mut R,
) -> Result<f64> {
    if x.is_empty() || y.is_empty() || n_projections == 0 {
        return Err(Error::Empty);
    }
    check_dim(x.dim(), y.dim())?;
    let d = x.dim();
    let wx = normalize(x_weights, x.len())?;
    let wy = 1.0 / y.len() as f64;
    let mut theta = vec![0.0; d];
    let mut pa: Vec<(f64, f64)> = vec![(0.0, 0.0); x.len()];
    let mut pb: Vec<(f64, f64)> = vec![(0.0, wy); y.len()];
    let mut total = 0.0;
    for _ in 0..n_projections {
        loop {
            for t in theta.iter_mut() {
                *t = rng.sample(StandardNormal);
            }
            let n = dot(&theta, &theta).sqrt();
            if n > 1e-12 {
                theta.iter_mut().for_each(|t| *t /= n);
                break;
            }
        }
        for (i, row) in x.rows().enumerate() {
            pa[i] = (dot(row, &theta), wx[i]);
        }
        for (i, row) in y.rows().enumerate() {
            pb[i] = (dot(row, &theta), wy);
        }
        total += w2_sq_1d(&mut pa, &mut pb);
    }
    Ok((total / n_projections as f64).sqrt())
}

/// Weighted share of samples whose nearest component mean is `l`, for every l.
pub fn mode_weights(points: &PointSet, weights: Option<&[f64]>, target: &GaussianMixture) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Empty);
    }
    check_dim(target.dim(), points.dim())?;
    let w = normalize(weights, points.len())?;
    let mut out = vec![0.0; target.n_components()];
    for (row, wi) in points.rows().zip(&w) {
        out[target.nearest_mean(row)] += wi;
    }
    Ok(out)
}

/// |ŵ − w| for the strongest component.
pub fn mode_weight_error(points: &PointSet, weights: Option<&[f64]>, target: &GaussianMixture) -> Result<f64> {
    if target.n_components() < 2 {
        return Err(invalid("target", "needs at least two components"));
    }
    let s = target.strongest();
    let est = mode_weights(points, weights, target)?;
    Ok((est[s] - target.weights()[s]).abs())
}

/// Total variation between estimated and true mode-weight histograms.
pub fn weight_histogram_tv(points: &PointSet, weights: Option<&[f64]>, target: &GaussianMixture) -> Result<f64> {
    let est = mode_weights(points, weights, target)?;
    Ok(0.5 * est.iter().zip(target.weights()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sw2: f64,
    pub mode_weight_abs_err: f64,
    pub weight_hist_tv: f64,
    pub ess_fraction: f64,
    pub n_projections: usize,
}

/// All metrics of `samples` against reference draws of `target`.
///
/// Projections come from a stream keyed only by `metric_seed`, so every run
/// is scored on the same directions.
pub fn evaluate(
    samples: &WeightedSamples,
    reference: &PointSet,
    target: &GaussianMixture,
    n_projections: usize,
    metric_seed: u64,
) -> Result<MetricsReport> {
    let w = samples.normalized_weights();
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mut rng = stream(metric_seed, &[role::METRIC]);
    let sw2 = sliced_wasserstein(&samples.points, Some(&w), reference, n_projections, &mut rng)?;
    let mode_weight_abs_err =
        if target.n_components() >= 2 { mode_weight_error(&samples.points, Some(&w), target)? } else { 0.0 };
    let weight_hist_tv = weight_histogram_tv(&samples.points, Some(&w), target)?;
    Ok(MetricsReport {
        sw2,
        mode_weight_abs_err,
        weight_hist_tv,
        ess_fraction: samples.ess_fraction()?,
        n_projections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ess_examples() {
        assert!((ess_fraction(&[0.0; 5]).unwrap() - 1.0).abs() < 1e-14);
        let one = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
        assert!((ess_fraction(&one).unwrap() - 0.25).abs() < 1e-14);
        let lw: Vec<f64> = [0.7f64, 0.1, 0.1, 0.1].iter().map(|w| w.ln()).collect();
        assert!((ess_fraction(&lw).unwrap() - 1.0 / (4.0 * 0.52)).abs() < 1e-12);
        assert_eq!(ess_fraction(&[f64::NEG_INFINITY; 3]), Err(Error::DegenerateWeights));
    }

    #[test]
    fn diracs_one_apart() {
        let a = PointSet::from_rows(1, &[[0.0]]);
        let b = PointSet::from_rows(1, &[[1.0]]);
        let mut rng = stream(0, &[]);
        assert!((sliced_wasserstein(&a, None, &b, 16, &mut rng).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let a = PointSet::from_rows(2, &[[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]]);
        let mut rng = stream(0, &[]);
        assert_eq!(sliced_wasserstein(&a, None, &a, 32, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn weighted_quantiles_match_replication() {
        // Weights (2, 1) on {0, 3} equal the unweighted set {0, 0, 3}.
        let a = PointSet::from_rows(1, &[[0.0], [3.0]]);
        let rep = PointSet::from_rows(1, &[[0.0], [0.0], [3.0]]);
        let b = PointSet::from_rows(1, &[[1.0], [2.0], [4.0]]);
        let mut r1 = stream(1, &[]);
        let mut r2 = stream(1, &[]);
        let w = sliced_wasserstein(&a, Some(&[2.0, 1.0]), &b, 4, &mut r1).unwrap();
        let u = sliced_wasserstein(&rep, None, &b, 4, &mut r2).unwrap();
        assert!((w - u).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_an_error() {
        let a = PointSet::zeros(0, 2);
        let b = PointSet::from_rows(2, &[[0.0, 0.0]]);
        let mut rng = stream(0, &[]);
        assert_eq!(sliced_wasserstein(&a, None, &b, 4, &mut rng), Err(Error::Empty));
    }

    #[test]
    fn single_mode_ensembles() {
        let g = crate::gmm::TargetSpec::two_modes(5.0, 2).unstandardized().build().unwrap();
        let at_strong = PointSet::from_rows(2, &[[-5.0, -5.0]; 10]);
        assert!((mode_weight_error(&at_strong, None, &g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((weight_histogram_tv(&at_strong, None, &g).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let at_weak = PointSet::from_rows(2, &[[5.0, 5.0]; 3]);
        assert!((weight_histogram_tv(&at_weak, None, &g).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_component_target_rejected_for_mode_error() {
        let g = crate::gmm::TargetSpec::gaussian(2).build().unwrap();
        let p = PointSet::from_rows(2, &[[0.0, 0.0]]);
        assert!(mode_weight_error(&p, None, &g).is_err());
    }
}
