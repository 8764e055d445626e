use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Momentum schedule of the accelerated method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmqsgdParams {
    pub gamma: f64,
    pub p: f64,
    pub beta: f64,
    pub eta: f64,
    pub theta: f64,
}

/// `beta = sqrt(2 p^2 mu gamma / 3)`, `eta = sqrt(3 / (2 mu gamma))`,
/// `theta = (p/eta - 1) / (beta p / eta - 1)`.
pub fn amqsgd_params(mu: f64, gamma: f64, p: f64) -> Result<AmqsgdParams> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::ParameterRegime(format!("mu must be positive, got {mu}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::ParameterRegime(format!("gamma must be positive, got {gamma}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterRegime(format!("p must lie in (0, 1], got {p}")));
    }
    let beta = (2.0 * p * p * mu * gamma / 3.0).sqrt();
    let eta = (3.0 / (2.0 * mu * gamma)).sqrt();
    if !(p / eta < 1.0) {
        return Err(Error::ParameterRegime(format!(
            "p / eta = {} must be below 1; decrease gamma or p",
            p / eta
        )));
    }
    let denominator = beta * p / eta - 1.0;
    if denominator.abs() < 1e-300 {
        return Err(Error::ParameterRegime("theta denominator vanishes".into()));
    }
    let theta = (p / eta - 1.0) / denominator;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::ParameterRegime(format!("theta = {theta} outside (0, 1)")));
    }
    Ok(AmqsgdParams {
        gamma,
        p,
        beta,
        eta,
        theta,
    })
}

/// Which step-size bound to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Nonconvex,
    Pl,
    StronglyConvexAccelerated,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Nonconvex => "nonconvex",
            Regime::Pl => "pl",
            Regime::StronglyConvexAccelerated => "strongly-convex-acc",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonconvex" => Ok(Regime::Nonconvex),
            "pl" => Ok(Regime::Pl),
            "strongly-convex-acc" | "accelerated" => Ok(Regime::StronglyConvexAccelerated),
            other => Err(Error::invalid(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryConstants {
    pub l: f64,
    pub mu: f64,
    pub delta_sq: f64,
    pub d: usize,
    pub m: usize,
    pub tau: f64,
}

/// Right-hand side of the step-size bound with unit constant.
///
/// Plain methods: `m^2 / (d^2 L (delta^2 + 1) tau)`.
/// Accelerated: `mu^(1/3) m^(1/2) / (tau L^(4/3) d^(1/2))`.
pub fn theory_step_size(regime: Regime, c: &TheoryConstants) -> Result<f64> {
    let positive = c.l > 0.0 && c.tau > 0.0 && c.delta_sq >= 0.0 && c.d > 0 && c.m > 0;
    if !positive || (regime == Regime::StronglyConvexAccelerated && !(c.mu > 0.0)) {
        return Err(Error::invalid("step-size constants must be positive"));
    }
    let (d, m) = (c.d as f64, c.m as f64);
    Ok(match regime {
        Regime::Nonconvex | Regime::Pl => m * m / (d * d * c.l * (c.delta_sq + 1.0) * c.tau),
        Regime::StronglyConvexAccelerated => {
            c.mu.cbrt() * m.sqrt() / (c.tau * c.l.powf(4.0 / 3.0) * d.sqrt())
        }
    })
}

/// `min(1, m^2 / (13 d^2 (delta^2 + 1) tau^2))`.
pub fn default_momentum_p(d: usize, m: usize, delta_sq: f64, tau: f64) -> f64 {
    let (d, m) = (d as f64, m as f64);
    (m * m / (13.0 * d * d * (delta_sq + 1.0) * tau * tau)).min(1.0)
}
