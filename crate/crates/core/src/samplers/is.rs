use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::WeightedSamples;
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, PointSet};

#[derive(Clone, Debug, PartialEq)]
pub struct IsOutput {
    pub samples: WeightedSamples,
    /// log of the mean importance weight (estimates log Z_target − log Z_proposal).
    pub log_normalizer: f64,
}

/// Self-normalized importance sampling.
pub fn importance_sampling<R, S, Q, P>(
    mut proposal_sampler: S,
    proposal_log_pdf: Q,
    target_log_pdf: P,
    n: usize,
    rng: &mut R,
) -> Result<IsOutput>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> Vec<f64>,
    Q: Fn(&[f64]) -> f64,
    P: Fn(&[f64]) -> f64,
{
    if n == 0 {
        return Err(Error::Empty);
    }
    let first = proposal_sampler(rng);
    let mut points = PointSet::with_capacity(n, first.len());
    points.push(&first);
    for _ in 1..n {
        let x = proposal_sampler(rng);
        points.push(&x);
    }
    let log_weights: Vec<f64> = points
        .rows()
        .map(|x| {
            let lw = target_log_pdf(x) - proposal_log_pdf(x);
            if lw.is_nan() {
                f64::NEG_INFINITY
            } else {
                lw
            }
        })
        .collect();
    let lse = log_sum_exp(&log_weights);
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    Ok(IsOutput { log_normalizer: lse - (n as f64).ln(), samples: WeightedSamples { points, log_weights } })
}
