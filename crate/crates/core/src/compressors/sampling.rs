use rand::Rng;

use super::mask::CoordinateMask;
use super::probability::ProbabilityVector;
use crate::{Error, Result};

/// Draw `m` distinct coordinates by sequential weighted sampling without
/// replacement, renormalising the remaining weights after every draw.
pub fn sample_mask<R: Rng + ?Sized>(
    p: &ProbabilityVector,
    m: usize,
    rng: &mut R,
) -> Result<CoordinateMask> {
    let d = p.len();
    let positive = p.support_size();
    if positive < m {
        return Err(Error::InfeasibleSample {
            positive,
            needed: m,
        });
    }
    if m == positive {
        // Forced: take the whole support without consuming randomness.
        let indices = (0..d).filter(|&j| p[j] > 0.0).collect();
        return CoordinateMask::new(indices, d);
    }

    let mut weights = p.as_slice().to_vec();
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = weights.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut cumulative = 0.0;
        let mut pick = None;
        for (j, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            cumulative += w;
            pick = Some(j);
            if target < cumulative {
                break;
            }
        }
        // `pick` is the last positive entry if rounding left `target` past the end.
        let j = pick.expect("support checked above");
        chosen.push(j);
        weights[j] = 0.0;
    }
    CoordinateMask::new(chosen, d)
}

/// Exact probability that [`sample_mask`] returns `subset` under `p`.
///
/// Sums over draw orders with a subset DP, `O(2^m m)` for `|subset| = m`.
pub fn subset_probability(p: &ProbabilityVector, subset: &CoordinateMask) -> f64 {
    let items = subset.indices();
    let m = items.len();
    if m == 0 {
        return 1.0;
    }
    if items.iter().any(|&j| p[j] <= 0.0) {
        return 0.0;
    }
    if m == 1 {
        return p[items[0]];
    }
    let weights: Vec<f64> = items.iter().map(|&j| p[j]).collect();
    let full = 1usize << m;
    // mass[s] = total weight of the items in `s`; prob[s] = P(first |s| draws are exactly s).
    let mut mass = vec![0.0; full];
    let mut prob = vec![0.0; full];
    prob[0] = 1.0;
    for s in 1..full {
        let low = s.trailing_zeros() as usize;
        mass[s] = mass[s & (s - 1)] + weights[low];
    }
    for s in 1..full {
        let mut acc = 0.0;
        let mut bits = s;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let prev = s & !(1 << i);
            let remaining = 1.0 - mass[prev];
            if remaining > 0.0 {
                acc += prob[prev] * weights[i] / remaining;
            }
        }
        prob[s] = acc;
    }
    prob[full - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn forced_and_point_mass() {
        let mut r = rng::seeded(1);
        let all = sample_mask(&ProbabilityVector::uniform(4), 4, &mut r).unwrap();
        assert_eq!(all.indices(), &[0, 1, 2, 3]);
        let p = ProbabilityVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(sample_mask(&p, 1, &mut r).unwrap().indices(), &[0]);
    }

    #[test]
    fn infeasible_sample() {
        let p = ProbabilityVector::new(vec![0.5, 0.5, 0.0]).unwrap();
        let err = sample_mask(&p, 3, &mut rng::seeded(0)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSample { positive: 2, needed: 3 }));
    }

    #[test]
    fn uniform_frequencies_match() {
        // Monte-Carlo frequency oracle: each of 10 coordinates ~ 0.1.
        let p = ProbabilityVector::uniform(10);
        let mut r = rng::seeded(2024);
        let mut counts = [0usize; 10];
        let draws = 1_000_000;
        for _ in 0..draws {
            counts[sample_mask(&p, 1, &mut r).unwrap().indices()[0]] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.1).abs() <= 0.001, "frequency {freq}");
        }
    }

    #[test]
    fn subset_probabilities_sum_to_one() {
        let p = ProbabilityVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut total = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                total += subset_probability(&p, &CoordinateMask::new(vec![a, b], 4).unwrap());
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
        // Hand value: P({0,1}) = .1*.2/.9 + .2*.1/.8
        let direct = 0.1 * 0.2 / 0.9 + 0.2 * 0.1 / 0.8;
        let dp = subset_probability(&p, &CoordinateMask::new(vec![0, 1], 4).unwrap());
        assert!((dp - direct).abs() < 1e-15);
    }

    #[test]
    fn sampler_matches_subset_law() {
        let p = ProbabilityVector::new(vec![0.05, 0.15, 0.3, 0.5]).unwrap();
        let mut r = rng::seeded(77);
        let trials = 400_000;
        let mut hits = std::collections::HashMap::new();
        for _ in 0..trials {
            *hits.entry(sample_mask(&p, 2, &mut r).unwrap()).or_insert(0usize) += 1;
        }
        for (mask, count) in hits {
            let expect = subset_probability(&p, &mask);
            let freq = count as f64 / trials as f64;
            let se = (expect * (1.0 - expect) / trials as f64).sqrt();
            assert!((freq - expect).abs() < 4.0 * se, "{mask:?}: {freq} vs {expect}");
        }
    }
}
