use std::fmt;
use std::str::FromStr;

use super::mask::History;
use crate::{Error, Result};

/// Tolerance on `sum(p) == 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point of the probability simplex over `0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("empty probability vector"));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let sum: f64 = p.iter().sum();
        // Summation error grows with the length; allow for it on top of the fixed tolerance.
        let tol = SIMPLEX_TOLERANCE + p.len() as f64 * f64::EPSILON;
        if (sum - 1.0).abs() > tol {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(ProbabilityVector(p))
    }

    pub fn uniform(len: usize) -> Self {
        ProbabilityVector(vec![1.0 / len as f64; len])
    }

    /// Uniform over the coordinates where `allowed` is true.
    pub fn uniform_over(allowed: &[bool]) -> Result<Self> {
        let count = allowed.iter().filter(|a| **a).count();
        if count == 0 {
            return Err(Error::invalid("no allowed coordinates"));
        }
        let w = 1.0 / count as f64;
        Ok(ProbabilityVector(
            allowed.iter().map(|&a| if a { w } else { 0.0 }).collect(),
        ))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|p| **p > 0.0).count()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Map from penalised weights to the simplex used by KAWASAKI.
///
/// All three are permutation-equivariant, which is what makes the resulting
/// selection chain symmetric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Activation {
    /// `|w_j| / ||w||_1`
    #[default]
    Normalize,
    Softmax,
    /// Euclidean projection onto the simplex.
    SimplexProjection,
}

impl Activation {
    pub fn apply(self, weights: &[f64]) -> Result<ProbabilityVector> {
        match self {
            Activation::Normalize => normalize(weights),
            Activation::Softmax => softmax(weights),
            Activation::SimplexProjection => project_to_simplex(weights),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Normalize => "normalize",
            Activation::Softmax => "softmax",
            Activation::SimplexProjection => "simplex-projection",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normalize" | "l1" => Ok(Activation::Normalize),
            "softmax" => Ok(Activation::Softmax),
            "simplex-projection" | "simplex_projection" | "projection" | "project" => {
                Ok(Activation::SimplexProjection)
            }
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

fn check_finite(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid("empty weight vector"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("weights must be finite"));
    }
    Ok(())
}

pub fn normalize(weights: &[f64]) -> Result<ProbabilityVector> {
    check_finite(weights)?;
    let norm: f64 = weights.iter().map(|w| w.abs()).sum();
    if norm == 0.0 {
        return Err(Error::invalid("cannot normalize the all-zero vector"));
    }
    Ok(ProbabilityVector(
        weights.iter().map(|w| w.abs() / norm).collect(),
    ))
}

pub fn softmax(weights: &[f64]) -> Result<ProbabilityVector> {
    check_finite(weights)?;
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = weights.iter().map(|w| (w - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(ProbabilityVector(exps.into_iter().map(|e| e / sum).collect()))
}

/// Euclidean projection onto the simplex by sort-and-threshold.
pub fn project_to_simplex(weights: &[f64]) -> Result<ProbabilityVector> {
    check_finite(weights)?;
    let mut sorted = weights.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    let p: Vec<f64> = weights.iter().map(|w| (w - threshold).max(0.0)).collect();
    // Absorb rounding so the result sums to one within the simplex tolerance.
    let sum: f64 = p.iter().sum();
    Ok(ProbabilityVector(p.into_iter().map(|v| v / sum).collect()))
}

/// BanLast law: uniform over coordinates absent from every stored mask.
///
/// During warm-up (fewer than K stored masks) only the available masks are banned.
pub fn banlast_probabilities(history: &History, d: usize, m: usize) -> Result<ProbabilityVector> {
    let mut allowed = vec![true; d];
    for mask in history.iter() {
        if mask.dim() != d {
            return Err(Error::invalid("history mask dimension mismatch"));
        }
        for &j in mask.indices() {
            allowed[j] = false;
        }
    }
    let available = allowed.iter().filter(|a| **a).count();
    if available < m || available == 0 {
        return Err(Error::InfeasibleBanSet {
            available,
            needed: m.max(1),
        });
    }
    ProbabilityVector::uniform_over(&allowed)
}

/// Penalised weights `(1/d) / b^count_j`, where `count_j` counts every stored mask containing `j`.
pub fn kawasaki_weights(history: &History, d: usize, b: f64) -> Result<Vec<f64>> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::invalid(format!("forgetting rate must exceed 1, got {b}")));
    }
    if history.iter().any(|m| m.dim() != d) {
        return Err(Error::invalid("history mask dimension mismatch"));
    }
    let base = 1.0 / d as f64;
    Ok(history
        .counts(d)
        .into_iter()
        .map(|c| base / b.powi(c as i32))
        .collect())
}

/// KAWASAKI law: the activation applied to the penalised weights.
pub fn kawasaki_probabilities(
    history: &History,
    d: usize,
    m: usize,
    b: f64,
    activation: Activation,
) -> Result<ProbabilityVector> {
    if m > d {
        return Err(Error::invalid(format!("m = {m} exceeds d = {d}")));
    }
    activation.apply(&kawasaki_weights(history, d, b)?)
}
