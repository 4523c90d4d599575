//! Durbin–Watson statistic with a permutation p-value.
//!
//! The null distribution is built by shuffling the residual order, which
//! needs no tabulated bounds and is exact up to Monte-Carlo error. The test
//! is one-sided against positive autocorrelation: p is the share of
//! permuted statistics at or below the observed one.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::StatsError;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwTest {
    pub statistic: f64,
    pub p: f64,
}

/// Σ_{t≥2}(e_t − e_{t−1})² ÷ Σ e_t². `None` when every residual is zero.
pub fn dw_statistic(residuals: &[f64]) -> Option<f64> {
    let denom: f64 = residuals.iter().map(|e| e * e).sum();
    if denom == 0.0 {
        return None;
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Some(num / denom)
}

pub fn durbin_watson(residuals: &[f64], permutations: usize, seed: u64) -> Result<DwTest, StatsError> {
    if residuals.len() < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: residuals.len() });
    }
    let statistic = dw_statistic(residuals).ok_or(StatsError::PerfectFit)?;
    let permutations = permutations.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = residuals.to_vec();
    let mut at_or_below = 0usize;
    for _ in 0..permutations {
        buf.shuffle(&mut rng);
        // same denominator under any permutation
        let d = dw_statistic(&buf).unwrap_or(f64::INFINITY);
        if d <= statistic {
            at_or_below += 1;
        }
    }
    Ok(DwTest { statistic, p: at_or_below as f64 / permutations as f64 })
}
