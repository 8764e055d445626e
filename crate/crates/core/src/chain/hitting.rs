//! Expected number of rounds until a fixed coordinate is first transmitted.
//!
//! With `alpha = d / m`, Rand-m hits any given coordinate after a geometric
//! number of rounds with mean `alpha`. BanLast bans the last `K` masks, which
//! shortens the wait.

use rayon::prelude::*;

use crate::compressors::{CompressorConfig, CompressorKind, CompressorState};
use crate::{rng, Error, Result};

/// Grid of `d / m` ratios used for the `K*` fit (10% down to 5% budgets).
pub const ALPHA_GRID: [f64; 9] = [5.3, 6.7, 8.3, 10.0, 11.1, 12.5, 14.3, 16.7, 20.0];

pub fn expected_hitting_time_randm(alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::OutOfRegime(format!("alpha = {alpha} must be at least 1")));
    }
    Ok(alpha)
}

/// Closed form for BanLast:
/// `sum_{s=1..K} s/(alpha-s+1) prod_{h<s-1} (1 - 1/(alpha-h)) + alpha (1 - 1/(alpha-K))^K`.
pub fn expected_hitting_time_banlast(alpha: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return expected_hitting_time_randm(alpha);
    }
    if !(alpha > (k + 1) as f64) {
        return Err(Error::OutOfRegime(format!(
            "alpha = {alpha} must exceed K + 1 = {}",
            k + 1
        )));
    }
    let mut survival = 1.0;
    let mut head = 0.0;
    for s in 1..=k {
        let hazard = 1.0 / (alpha - (s - 1) as f64);
        head += s as f64 * hazard * survival;
        survival *= 1.0 - hazard;
    }
    let tail = alpha * (1.0 - 1.0 / (alpha - k as f64)).powi(k as i32);
    Ok(head + tail)
}

/// Exact expectation for the BanLast chain started from an empty history.
///
/// Warm-up round `s` bans `(s-1) m` coordinates, so the hit probability is
/// `1/(alpha-s+1)`; afterwards it is `1/(alpha-K)` forever. The steady-state
/// part is weighted by the probability of surviving warm-up.
pub fn expected_hitting_time_banlast_exact(alpha: f64, k: usize) -> Result<f64> {
    if !(alpha >= (k + 1) as f64) {
        return Err(Error::OutOfRegime(format!(
            "alpha = {alpha} must be at least K + 1 = {}",
            k + 1
        )));
    }
    let mut survival = 1.0;
    let mut mean = 0.0;
    for s in 1..=k {
        let hazard = 1.0 / (alpha - (s - 1) as f64);
        mean += s as f64 * hazard * survival;
        survival *= 1.0 - hazard;
    }
    mean += survival * (k as f64 + (alpha - k as f64));
    Ok(mean)
}

/// `argmin_K expected_hitting_time_banlast(alpha, K)` over
/// `K in 0..=min(k_max, ceil(alpha) - 2)`, ties to the smaller `K`.
pub fn optimal_history_size(alpha: f64, k_max: usize) -> Result<usize> {
    if !(alpha > 2.0) {
        return Err(Error::OutOfRegime(format!("alpha = {alpha} must exceed 2")));
    }
    let upper = k_max.min(alpha.ceil() as usize - 2);
    let mut best = (0, expected_hitting_time_banlast(alpha, 0)?);
    for k in 1..=upper {
        let value = expected_hitting_time_banlast(alpha, k)?;
        if value < best.1 {
            best = (k, value);
        }
    }
    Ok(best.0)
}

/// Least-squares slope through the origin of `y` against `x`.
pub fn zero_intercept_slope(x: &[f64], y: &[f64]) -> f64 {
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|a| a * a).sum();
    xy / xx
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HittingEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

const TRIALS_PER_CHUNK: u64 = 4096;
const MAX_STEPS_PER_TRIAL: u64 = 100_000_000;

/// Simulate fresh compressors from an empty history and count the rounds until
/// `target` is first in the mask. Trial `i` uses stream `i` of `seed`; chunks
/// run in parallel and are merged in order.
pub fn monte_carlo_hitting_time(
    config: &CompressorConfig,
    target: usize,
    trials: u64,
    seed: u64,
) -> Result<HittingEstimate> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if target >= config.d {
        return Err(Error::invalid(format!(
            "target coordinate {target} outside dimension {}",
            config.d
        )));
    }
    config.validate()?;
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * TRIALS_PER_CHUNK;
            let end = (start + TRIALS_PER_CHUNK).min(trials);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for trial in start..end {
                let steps = hitting_steps(config, target, seed, trial)? as f64;
                sum += steps;
                sum_sq += steps * steps;
            }
            Ok((sum, sum_sq))
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in partial {
        let (s, q) = p?;
        sum += s;
        sum_sq += q;
    }
    let n = trials as f64;
    let mean = sum / n;
    let variance = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(HittingEstimate {
        mean,
        stderr: (variance / n).sqrt(),
        trials,
    })
}

fn hitting_steps(config: &CompressorConfig, target: usize, seed: u64, trial: u64) -> Result<u64> {
    match config.kind {
        CompressorKind::Identity | CompressorKind::Natural => return Ok(1),
        CompressorKind::PermK => {
            let mut state = CompressorState::for_run(config.clone(), seed ^ trial.rotate_left(32))?;
            let probe = vec![1.0; config.d];
            for step in 1..=MAX_STEPS_PER_TRIAL {
                let out = state.compress(&probe)?;
                if out.mask.is_some_and(|m| m.contains(target)) {
                    return Ok(step);
                }
            }
        }
        _ => {
            let mut state = CompressorState::new(config.clone(), rng::derive(seed, trial))?;
            for step in 1..=MAX_STEPS_PER_TRIAL {
                if state.next_mask()?.contains(target) {
                    return Ok(step);
                }
            }
        }
    }
    Err(Error::Numerical(format!(
        "coordinate {target} not selected within {MAX_STEPS_PER_TRIAL} rounds"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn randm_values() {
        assert_eq!(expected_hitting_time_randm(10.0).unwrap(), 10.0);
        assert_eq!(expected_hitting_time_randm(1.0).unwrap(), 1.0);
        assert!(expected_hitting_time_randm(0.5).is_err());
    }

    #[test]
    fn banlast_formula() {
        let v = expected_hitting_time_banlast(10.0, 7).unwrap();
        assert!((v - 3.4).abs() < 0.05, "{v}");
        assert_eq!(expected_hitting_time_banlast(10.0, 0).unwrap(), 10.0);
        assert!(matches!(
            expected_hitting_time_banlast(8.0, 7),
            Err(Error::OutOfRegime(_))
        ));
    }

    #[test]
    fn banlast_exact_matches_telescoped_form() {
        // Survival after warm-up telescopes to (alpha - K) / alpha.
        for alpha in [5.0, 8.5, 10.0, 20.0] {
            for k in 0..(alpha as usize - 1) {
                let kf = k as f64;
                let closed = kf * (kf + 1.0) / (2.0 * alpha) + alpha - kf;
                let v = expected_hitting_time_banlast_exact(alpha, k).unwrap();
                assert!((v - closed).abs() < 1e-12, "alpha {alpha} K {k}");
            }
        }
    }

    #[test]
    fn banlast_beats_randm_on_grid() {
        for alpha in [3.5, 5.0, 7.2, 10.0, 15.0, 30.0] {
            let mut k = 1;
            while alpha > (k + 1) as f64 {
                assert!(
                    expected_hitting_time_banlast(alpha, k).unwrap()
                        < expected_hitting_time_randm(alpha).unwrap()
                );
                k += 1;
            }
        }
    }

    #[test]
    fn optimal_k_is_brute_force_minimum() {
        for alpha in ALPHA_GRID {
            let k = optimal_history_size(alpha, 64).unwrap();
            let best = expected_hitting_time_banlast(alpha, k).unwrap();
            for other in 0..=(alpha.ceil() as usize - 2) {
                let v = expected_hitting_time_banlast(alpha, other).unwrap();
                assert!(v > best || (v == best && other >= k));
            }
        }
        assert!(optimal_history_size(3.0, 10).unwrap() <= 1);
        assert_eq!(optimal_history_size(10.0, 0).unwrap(), 0);
    }

    #[test]
    fn identity_hits_immediately() {
        let est = monte_carlo_hitting_time(&CompressorConfig::identity(5), 0, 100, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn randm_monte_carlo_is_geometric() {
        let est = monte_carlo_hitting_time(&CompressorConfig::rand(50, 5), 0, 200_000, 3).unwrap();
        assert!((est.mean - 10.0).abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let c = CompressorConfig::banlast(20, 2, 3);
        let a = monte_carlo_hitting_time(&c, 4, 10_000, 9).unwrap();
        let b = monte_carlo_hitting_time(&c, 4, 10_000, 9).unwrap();
        assert_eq!(a, b);
    }
}
