use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::{partition, Dataset};
use crate::objective::Objective;
use crate::{rng, Error, Result};

/// `log(1 + exp(-z))` without overflow.
fn log1p_exp_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(z))` without overflow.
fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `(1/N) sum_s log(1 + exp(-y_s w.x_s)) + lambda ||w||^2` and its gradient.
pub fn loss_and_gradient(w: &[f64], shard: &Dataset, lambda: f64) -> (f64, Vec<f64>) {
    assert_eq!(w.len(), shard.dim(), "weight dimension mismatch");
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    for s in 0..shard.len() {
        let y = shard.label(s);
        let z = y * shard.row_dot(s, w);
        loss += log1p_exp_neg(z);
        shard.add_row(s, -y * sigmoid_neg(z), &mut grad);
    }
    let inv = if shard.is_empty() { 0.0 } else { 1.0 / shard.len() as f64 };
    let mut norm_sq = 0.0;
    for (g, &x) in grad.iter_mut().zip(w) {
        *g = *g * inv + 2.0 * lambda * x;
        norm_sq += x * x;
    }
    (loss * inv + lambda * norm_sq, grad)
}

/// Estimated problem constants. Fields stay `None` until computed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemConstants {
    pub l_global: Option<f64>,
    pub l_local: Option<Vec<f64>>,
    pub mu: Option<f64>,
    pub delta_sq: Option<f64>,
    pub sigma_sq: Option<f64>,
}

impl ProblemConstants {
    /// `(1/n) sum_i L_i^2`.
    pub fn mean_sq_local_smoothness(&self) -> Option<f64> {
        self.l_local
            .as_ref()
            .map(|l| l.iter().map(|v| v * v).sum::<f64>() / l.len() as f64)
    }
}

/// L2-regularised logistic regression split across `n` workers.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardedProblem {
    shards: Vec<Dataset>,
    lambda: f64,
    pub constants: ProblemConstants,
}

impl ShardedProblem {
    pub fn new(shards: Vec<Dataset>, lambda: f64) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::invalid("need at least one shard"));
        }
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        let d = shards[0].dim();
        if shards.iter().any(|s| s.dim() != d) {
            return Err(Error::invalid("shards differ in dimension"));
        }
        if shards.iter().any(Dataset::is_empty) {
            return Err(Error::invalid("every shard needs at least one row"));
        }
        Ok(ShardedProblem {
            shards,
            lambda,
            constants: ProblemConstants::default(),
        })
    }

    /// Shuffle with stream 0 of `seed` and split into `n` shards.
    pub fn partitioned(dataset: &Dataset, n: usize, lambda: f64, seed: u64) -> Result<Self> {
        let mut r = rng::derive(seed, rng::PARTITION_STREAM);
        Self::new(partition(dataset, n, &mut r)?, lambda)
    }

    pub fn shards(&self) -> &[Dataset] {
        &self.shards
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn total_rows(&self) -> usize {
        self.shards.iter().map(Dataset::len).sum()
    }

    /// Fill `l_global`, `l_local` and `mu` (when `lambda > 0`).
    pub fn estimate_constants(&mut self) -> Result<()> {
        let local = self
            .shards
            .iter()
            .map(|s| estimate_smoothness(s, self.lambda))
            .collect::<Result<Vec<_>>>()?;
        self.constants.l_global = Some(estimate_global_smoothness(self)?);
        self.constants.l_local = Some(local);
        self.constants.mu = strong_convexity_constant(self.lambda).ok();
        Ok(())
    }
}

impl Objective for ShardedProblem {
    fn dim(&self) -> usize {
        self.shards[0].dim()
    }

    fn workers(&self) -> usize {
        self.shards.len()
    }

    fn local_loss_grad(&self, i: usize, w: &[f64]) -> (f64, Vec<f64>) {
        loss_and_gradient(w, &self.shards[i], self.lambda)
    }
}

pub const POWER_ITERATION_TOLERANCE: f64 = 1e-8;
const POWER_ITERATION_CAP: usize = 200_000;

/// Largest eigenvalue of a symmetric PSD operator by power iteration, stopping
/// once `||A v - lambda v|| <= tol * lambda`.
pub fn power_iteration(dim: usize, tol: f64, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    if dim == 0 {
        return Ok(0.0);
    }
    let mut r = rng::seeded(0x5eed);
    let mut v: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    for _ in 0..POWER_ITERATION_CAP {
        let av = apply(&v);
        let lambda: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        let residual = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if residual <= tol * lambda.abs() {
            return Ok(lambda);
        }
        v = av.into_iter().map(|x| x / norm).collect();
    }
    Err(Error::Numerical(format!(
        "power iteration did not reach tolerance {tol} in {POWER_ITERATION_CAP} steps"
    )))
}

fn gram_apply(shard: &Dataset, v: &[f64], scale: f64, out: &mut [f64]) {
    for s in 0..shard.len() {
        let xv = shard.row_dot(s, v);
        shard.add_row(s, scale * xv, out);
    }
}

/// `L_i = lambda_max(X^T X) / (4 |shard|) + 2 lambda`.
pub fn estimate_smoothness(shard: &Dataset, lambda: f64) -> Result<f64> {
    if shard.is_empty() {
        return Err(Error::invalid("cannot estimate smoothness of an empty shard"));
    }
    let top = power_iteration(shard.dim(), POWER_ITERATION_TOLERANCE, |v| {
        let mut out = vec![0.0; v.len()];
        gram_apply(shard, v, 1.0, &mut out);
        out
    })?;
    Ok(top / (4.0 * shard.len() as f64) + 2.0 * lambda)
}

/// Smoothness of the average `f`: top eigenvalue of `(1/n) sum_i X_i^T X_i / (4 |S_i|)` plus `2 lambda`.
pub fn estimate_global_smoothness(problem: &ShardedProblem) -> Result<f64> {
    let n = problem.shards.len() as f64;
    let top = power_iteration(problem.dim(), POWER_ITERATION_TOLERANCE, |v| {
        let mut out = vec![0.0; v.len()];
        for shard in &problem.shards {
            gram_apply(shard, v, 1.0 / (4.0 * shard.len() as f64 * n), &mut out);
        }
        out
    })?;
    Ok(top + 2.0 * problem.lambda)
}

/// `mu = 2 lambda`.
pub fn strong_convexity_constant(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda = {lambda} gives no strong convexity"
        )));
    }
    Ok(2.0 * lambda)
}

/// Pairs `(||grad f(x)||^2, ||grad f_i(x) - grad f(x)||^2)` over all workers and probes.
pub fn similarity_pairs<O: Objective + ?Sized>(problem: &O, probes: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = problem.workers();
    let mut pairs = Vec::with_capacity(n * probes.len());
    for x in probes {
        let locals: Vec<Vec<f64>> = (0..n).map(|i| problem.local_loss_grad(i, x).1).collect();
        let mut mean = vec![0.0; x.len()];
        for g in &locals {
            for (m, v) in mean.iter_mut().zip(g) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let a: f64 = mean.iter().map(|v| v * v).sum();
        for g in &locals {
            let b: f64 = g.iter().zip(&mean).map(|(u, v)| (u - v).powi(2)).sum();
            pairs.push((a, b));
        }
    }
    pairs
}

/// Envelope fit of `||grad f_i - grad f||^2 <= delta^2 ||grad f||^2 + sigma^2`.
///
/// `sigma^2` is the largest deviation among pairs whose gradient norm is below
/// the median; `delta^2` is the smallest slope covering the remaining pairs.
pub fn estimate_similarity<O: Objective + ?Sized>(problem: &O, probes: &[Vec<f64>]) -> Result<(f64, f64)> {
    if probes.len() < 2 {
        return Err(Error::invalid("similarity estimation needs at least two probe points"));
    }
    let pairs = similarity_pairs(problem, probes);
    let mut norms: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    norms.sort_by(f64::total_cmp);
    let median = norms[norms.len() / 2];
    let below: Vec<&(f64, f64)> = pairs.iter().filter(|p| p.0 < median).collect();
    let low: Vec<&(f64, f64)> = if below.is_empty() {
        pairs.iter().filter(|p| p.0 <= median).collect()
    } else {
        below
    };
    let sigma_sq = low.iter().map(|p| p.1).fold(0.0, f64::max);
    let delta_sq = pairs
        .iter()
        .filter(|p| !low.contains(p) && p.0 > 0.0)
        .map(|p| (p.1 - sigma_sq) / p.0)
        .fold(0.0, f64::max);
    Ok((delta_sq, sigma_sq))
}

/// `count` Gaussian perturbations of the origin with standard deviation `scale`.
pub fn gaussian_probes(dim: usize, count: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| scale * r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::QuadraticProblem;

    fn random_shard(rows: usize, dim: usize, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let dense: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let labels = (0..rows)
            .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Dataset::from_dense(&dense, labels).unwrap()
    }

    #[test]
    fn value_at_origin() {
        let shard = random_shard(8, 3, 1);
        let (loss, grad) = loss_and_gradient(&[0.0; 3], &shard, 0.3);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        let mut expect = vec![0.0; 3];
        for s in 0..8 {
            shard.add_row(s, -shard.label(s) / 16.0, &mut expect);
        }
        for (g, e) in grad.iter().zip(expect) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn separable_limit() {
        let shard = Dataset::from_dense(&[vec![1.0]], vec![1.0]).unwrap();
        let (loss, grad) = loss_and_gradient(&[800.0], &shard, 0.0);
        assert_eq!(loss, 0.0);
        assert_eq!(grad[0], -0.0);
        let (loss, _) = loss_and_gradient(&[-800.0], &shard, 0.0);
        assert!((loss - 800.0).abs() < 1e-9);
    }

    #[test]
    fn smoothness_examples() {
        let shard = Dataset::from_dense(&[vec![1.0]], vec![1.0]).unwrap();
        assert!((estimate_smoothness(&shard, 0.0).unwrap() - 0.25).abs() < 1e-12);
        assert!((estimate_smoothness(&shard, 0.05).unwrap() - 0.35).abs() < 1e-12);
    }

    #[test]
    fn strong_convexity() {
        assert_eq!(strong_convexity_constant(0.05).unwrap(), 0.1);
        assert!(strong_convexity_constant(0.0).is_err());
    }

    #[test]
    fn identical_shards_are_similar() {
        let shard = random_shard(20, 4, 2);
        let problem = ShardedProblem::new(vec![shard.clone(), shard], 0.1).unwrap();
        let probes = gaussian_probes(4, 6, 1.0, 3);
        assert_eq!(estimate_similarity(&problem, &probes).unwrap(), (0.0, 0.0));
        let single = ShardedProblem::new(vec![random_shard(5, 4, 4)], 0.1).unwrap();
        assert_eq!(estimate_similarity(&single, &probes).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn constant_shifts_give_sigma_only() {
        // grad f_i = x - c_i with mean-zero c_i: deviations are ||c_i||^2.
        let centers = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]];
        let q = QuadraticProblem::new(vec![vec![1.0; 2]; 4], centers).unwrap();
        let probes = gaussian_probes(2, 20, 3.0, 5);
        let (delta, sigma) = estimate_similarity(&q, &probes).unwrap();
        assert!(delta.abs() < 1e-12);
        assert!((sigma - 4.0).abs() < 0.05 * 4.0);
    }
}
