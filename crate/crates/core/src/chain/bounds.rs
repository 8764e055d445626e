use statrs::function::gamma::ln_gamma;

use super::model::binomial;
use crate::{Error, Result};

/// Geometric ergodicity constants: `|P^t(s0, s) - pi_s| <= c * rho^t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgodicityBound {
    pub rho: f64,
    pub c: f64,
}

impl ErgodicityBound {
    fn checked(rho: f64, c: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0 && c > 0.0 && c.is_finite()) {
            return Err(Error::Numerical(format!("degenerate bound rho = {rho}, C = {c}")));
        }
        Ok(ErgodicityBound { rho, c })
    }

    pub fn at(&self, t: usize) -> f64 {
        self.c * self.rho.powi(t as i32)
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// BanLast: `rho = sqrt(1 - (C(d-2Km, m) / C(d-Km, m)^2)^K)`, `C = rho^-2`.
/// Valid for `d > (2K+1) m`.
pub fn rho_bound_banlast(d: usize, m: usize, k: usize) -> Result<ErgodicityBound> {
    if m == 0 || k == 0 {
        return Err(Error::OutOfRegime(format!("need m >= 1 and K >= 1, got m = {m}, K = {k}")));
    }
    if d <= (2 * k + 1) * m {
        return Err(Error::OutOfRegime(format!(
            "need d > (2K+1)m = {}, got d = {d}",
            (2 * k + 1) * m
        )));
    }
    let num = binomial(d - 2 * k * m, m);
    let den = binomial(d - k * m, m).and_then(|b| b.checked_mul(b));
    let ratio = match (num, den) {
        (Some(n), Some(q)) if n < (1u128 << 100) && q < (1u128 << 100) => n as f64 / q as f64,
        _ => (ln_binomial(d - 2 * k * m, m) - 2.0 * ln_binomial(d - k * m, m)).exp(),
    };
    // 1 - ratio^K, computed without cancellation for small ratio^K.
    let one_minus = -(k as f64 * ratio.ln()).exp_m1();
    let rho = one_minus.sqrt();
    ErgodicityBound::checked(rho, 1.0 / one_minus)
}

/// KAWASAKI with normalisation: `rho = 1 - [d b^K - m (b^K - 1)]^(-mK)`, `C = 1/rho`.
pub fn rho_bound_kawasaki_normalize(d: usize, m: usize, k: usize, b: f64) -> Result<ErgodicityBound> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::OutOfRegime(format!("forgetting rate must exceed 1, got {b}")));
    }
    if m == 0 || d < m || k == 0 {
        return Err(Error::OutOfRegime(format!(
            "need 1 <= m <= d and K >= 1, got d = {d}, m = {m}, K = {k}"
        )));
    }
    let bk = b.powi(k as i32);
    let base = d as f64 * bk - m as f64 * (bk - 1.0);
    let rho = 1.0 - base.powf(-((m * k) as f64));
    ErgodicityBound::checked(rho, 1.0 / rho)
}
