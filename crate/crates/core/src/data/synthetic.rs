use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::Dataset;
use super::logistic::ShardedProblem;
use crate::{rng, Result};

/// Heterogeneous logistic problem: shard `i` draws features from
/// `N(shift * u_i, I)` for a random unit direction `u_i` and labels from its
/// own random separator, so the local minimisers disagree.
pub fn shifted_shards(
    n: usize,
    rows_per_shard: usize,
    d: usize,
    shift: f64,
    lambda: f64,
    seed: u64,
) -> Result<ShardedProblem> {
    let mut r = rng::seeded(seed);
    let mut normal = move || r.sample::<f64, _>(StandardNormal);
    let unit = |normal: &mut dyn FnMut() -> f64| {
        let v: Vec<f64> = (0..d).map(|_| normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let mut shards = Vec::with_capacity(n);
    for _ in 0..n {
        let center = unit(&mut normal);
        let separator = unit(&mut normal);
        let mut rows = Vec::with_capacity(rows_per_shard);
        let mut labels = Vec::with_capacity(rows_per_shard);
        for _ in 0..rows_per_shard {
            let x: Vec<f64> = center.iter().map(|c| shift * c + normal()).collect();
            let score: f64 = x.iter().zip(&separator).map(|(a, b)| a * b).sum::<f64>() + 0.5 * normal();
            labels.push(if score >= 0.0 { 1.0 } else { -1.0 });
            rows.push(x);
        }
        shards.push(Dataset::from_dense(&rows, labels)?);
    }
    ShardedProblem::new(shards, lambda)
}
