//! Non-Markovian baselines: PermK and Natural compression.

use rand::seq::SliceRandom;
use rand::Rng;

use super::mask::CoordinateMask;
use crate::{Error, Result};

/// Bits per coordinate for a dense float32 transmission.
pub const DENSE_BITS_PER_COORD: u64 = 32;
/// Bits per coordinate after Natural compression: sign plus 8-bit exponent.
pub const NATURAL_BITS_PER_COORD: u64 = 9;

/// One PermK round: a uniform permutation of `0..d` cut into `n` contiguous blocks.
///
/// When `n` does not divide `d` the first `d mod n` workers get one extra
/// coordinate if `pad` is set; otherwise the call is rejected.
pub fn perm_k_masks<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    pad: bool,
    rng: &mut R,
) -> Result<Vec<CoordinateMask>> {
    if n == 0 || n > d {
        return Err(Error::invalid(format!("PermK needs 1 <= n <= d, got n = {n}, d = {d}")));
    }
    if !d.is_multiple_of(n) && !pad {
        return Err(Error::invalid(format!("{n} workers do not divide dimension {d}")));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let base = d / n;
    let extra = d % n;
    let mut masks = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        masks.push(CoordinateMask::new(perm[start..start + len].to_vec(), d)?);
        start += len;
    }
    Ok(masks)
}

/// Unbiased stochastic rounding of every entry to a signed power of two.
///
/// `|x|` in `[2^e, 2^(e+1))` rounds up with probability `(|x| - 2^e) / 2^e`.
/// Zero and exact powers of two are fixed points.
pub fn natural_compress<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Vec<f64> {
    x.iter().map(|&v| natural_round(v, rng)).collect()
}

fn natural_round<R: Rng + ?Sized>(v: f64, rng: &mut R) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let a = v.abs();
    let mut low = 2f64.powi(a.log2().floor() as i32);
    // log2 can be off by one ulp near powers of two.
    if low > a {
        low *= 0.5;
    } else if low * 2.0 <= a {
        low *= 2.0;
    }
    if low == a {
        return v;
    }
    let up_prob = (a - low) / low;
    let magnitude = if rng.random::<f64>() < up_prob {
        low * 2.0
    } else {
        low
    };
    magnitude.copysign(v)
}
