//! Two-sided paired randomization (sign-flip) test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricError;

pub const DEFAULT_RESAMPLES: usize = 1000;

/// p-value for the null hypothesis that paired scores `a` and `b` come from
/// the same system. The statistic is |mean(a - b)|; each resample flips the
/// sign of every difference with probability one half. Resample `r` draws
/// from ChaCha stream `r`, so the result does not depend on thread count.
pub fn paired_randomization_test(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();
    let hits = crate::par::count_range(resamples, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let s: f64 = diffs.iter().map(|d| if rng.gen::<bool>() { *d } else { -*d }).sum();
        (s / n).abs() >= observed - 1e-12
    });
    Ok((1 + hits) as f64 / (1 + resamples) as f64)
}
