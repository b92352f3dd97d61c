use alloc::vec::Vec;
use rand::Rng;

/// Systematic resampling: ancestor indices for `n` offspring.
///
/// `weights` must be normalized. One uniform draw places a comb of n
/// evenly-spaced points on the cumulative weights.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    if weights.is_empty() {
        return out;
    }
    let u0: f64 = rng.random::<f64>() / n as f64;
    let step = 1.0 / n as f64;
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let u = u0 + i as f64 * step;
        while u >= cum && j + 1 < weights.len() {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}
