use std::fmt;
use std::str::FromStr;

use super::baselines::{self, DENSE_BITS_PER_COORD, NATURAL_BITS_PER_COORD};
use super::mask::{CoordinateMask, History};
use super::probability::{self, Activation, ProbabilityVector};
use super::sampling::sample_mask;
use crate::rng::{self, SimRng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompressorKind {
    Identity,
    RandM,
    BanLast,
    Kawasaki,
    PermK,
    Natural,
}

impl CompressorKind {
    pub fn name(self) -> &'static str {
        match self {
            CompressorKind::Identity => "identity",
            CompressorKind::RandM => "rand",
            CompressorKind::BanLast => "banlast",
            CompressorKind::Kawasaki => "kawasaki",
            CompressorKind::PermK => "permk",
            CompressorKind::Natural => "natural",
        }
    }

    /// Whether the selection law depends on the mask history.
    pub fn is_markovian(self) -> bool {
        matches!(self, CompressorKind::BanLast | CompressorKind::Kawasaki)
    }

    /// Whether the output is a rescaled coordinate subset.
    pub fn is_sparsifier(self) -> bool {
        matches!(
            self,
            CompressorKind::RandM
                | CompressorKind::BanLast
                | CompressorKind::Kawasaki
                | CompressorKind::PermK
        )
    }
}

impl fmt::Display for CompressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompressorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "none" => Ok(CompressorKind::Identity),
            "rand" | "randm" | "rand-m" | "randk" => Ok(CompressorKind::RandM),
            "banlast" => Ok(CompressorKind::BanLast),
            "kawasaki" => Ok(CompressorKind::Kawasaki),
            "permk" => Ok(CompressorKind::PermK),
            "natural" => Ok(CompressorKind::Natural),
            other => Err(Error::invalid(format!("unknown compressor `{other}`"))),
        }
    }
}

/// Static description of one worker's compressor.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressorConfig {
    pub kind: CompressorKind,
    pub d: usize,
    /// Coordinates per mask. Ignored by Identity, Natural and PermK.
    pub m: usize,
    /// History size K.
    pub history: usize,
    /// KAWASAKI forgetting rate b.
    pub forgetting_rate: f64,
    pub activation: Activation,
    /// Number of workers sharing a PermK permutation.
    pub workers: usize,
    pub worker_id: usize,
    /// Let BanLast run at `d == (K + 1) m`, where its chain is periodic.
    pub allow_periodic: bool,
}

impl CompressorConfig {
    pub fn new(kind: CompressorKind, d: usize, m: usize) -> Self {
        CompressorConfig {
            kind,
            d,
            m,
            history: 0,
            forgetting_rate: 50.0,
            activation: Activation::Normalize,
            workers: 1,
            worker_id: 0,
            allow_periodic: false,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(CompressorKind::Identity, d, d)
    }

    pub fn rand(d: usize, m: usize) -> Self {
        Self::new(CompressorKind::RandM, d, m)
    }

    pub fn banlast(d: usize, m: usize, k: usize) -> Self {
        CompressorConfig {
            history: k,
            ..Self::new(CompressorKind::BanLast, d, m)
        }
    }

    pub fn kawasaki(d: usize, m: usize, k: usize, b: f64, activation: Activation) -> Self {
        CompressorConfig {
            history: k,
            forgetting_rate: b,
            activation,
            ..Self::new(CompressorKind::Kawasaki, d, m)
        }
    }

    pub fn permk(d: usize, workers: usize, worker_id: usize) -> Self {
        CompressorConfig {
            workers,
            worker_id,
            ..Self::new(CompressorKind::PermK, d, d.div_ceil(workers.max(1)))
        }
    }

    pub fn natural(d: usize) -> Self {
        Self::new(CompressorKind::Natural, d, d)
    }

    pub fn for_worker(&self, workers: usize, worker_id: usize) -> Self {
        CompressorConfig {
            workers,
            worker_id,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let CompressorConfig { d, m, history: k, .. } = *self;
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        match self.kind {
            CompressorKind::Identity | CompressorKind::Natural => Ok(()),
            CompressorKind::RandM => {
                if m == 0 || m > d {
                    return Err(Error::invalid(format!("need 1 <= m <= d, got m = {m}, d = {d}")));
                }
                Ok(())
            }
            CompressorKind::BanLast => {
                if m == 0 {
                    return Err(Error::invalid("m must be positive"));
                }
                let needed = (k + 1) * m;
                let ok = if self.allow_periodic { d >= needed } else { d > needed };
                if !ok {
                    return Err(Error::invalid(format!(
                        "BanLast requires d > (K+1)m, got d = {d}, K = {k}, m = {m}"
                    )));
                }
                Ok(())
            }
            CompressorKind::Kawasaki => {
                if m == 0 || m > d {
                    return Err(Error::invalid(format!("need 1 <= m <= d, got m = {m}, d = {d}")));
                }
                if !(self.forgetting_rate > 1.0) || !self.forgetting_rate.is_finite() {
                    return Err(Error::invalid(format!(
                        "forgetting rate must exceed 1, got {}",
                        self.forgetting_rate
                    )));
                }
                Ok(())
            }
            CompressorKind::PermK => {
                if self.workers == 0 || self.workers > d || self.worker_id >= self.workers {
                    return Err(Error::invalid(format!(
                        "PermK needs worker_id < workers <= d, got {} / {} / {d}",
                        self.worker_id, self.workers
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Output of one compression step.
#[derive(Clone, Debug, PartialEq)]
pub struct Compressed {
    pub values: Vec<f64>,
    pub coords_sent: usize,
    pub bits_sent: u64,
    /// The transmitted mask, for sparsifiers.
    pub mask: Option<CoordinateMask>,
}

/// `(d/m) x ⊙ 1(mask)`.
pub fn sparsify(x: &[f64], mask: &CoordinateMask) -> Result<Vec<f64>> {
    if mask.dim() != x.len() {
        return Err(Error::invalid(format!(
            "mask dimension {} does not match vector length {}",
            mask.dim(),
            x.len()
        )));
    }
    let scale = mask.dim() as f64 / mask.len() as f64;
    Ok(scaled_restriction(x, mask, scale))
}

fn scaled_restriction(x: &[f64], mask: &CoordinateMask, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for &j in mask.indices() {
        out[j] = scale * x[j];
    }
    out
}

/// One worker's compressor: configuration, mask history and random stream.
///
/// Owned by a single worker; never shared.
#[derive(Clone, Debug)]
pub struct CompressorState {
    config: CompressorConfig,
    history: History,
    rng: SimRng,
    /// PermK only: seed of the permutation stream all workers share.
    shared_seed: u64,
    step: u64,
}

impl CompressorState {
    pub fn new(config: CompressorConfig, rng: SimRng) -> Result<Self> {
        config.validate()?;
        Ok(CompressorState {
            history: History::new(config.history),
            config,
            rng,
            shared_seed: 0,
            step: 0,
        })
    }

    /// State for worker `config.worker_id` of a run seeded with `master_seed`.
    pub fn for_run(config: CompressorConfig, master_seed: u64) -> Result<Self> {
        let rng = rng::derive(master_seed, rng::worker_stream(config.worker_id));
        let mut state = Self::new(config, rng)?;
        state.shared_seed = master_seed;
        Ok(state)
    }

    pub fn config(&self) -> &CompressorConfig {
        &self.config
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Selection law for the next mask given the current history.
    pub fn probabilities(&self) -> Result<ProbabilityVector> {
        let c = &self.config;
        match c.kind {
            CompressorKind::RandM => Ok(ProbabilityVector::uniform(c.d)),
            CompressorKind::BanLast => probability::banlast_probabilities(&self.history, c.d, c.m),
            CompressorKind::Kawasaki => probability::kawasaki_probabilities(
                &self.history,
                c.d,
                c.m,
                c.forgetting_rate,
                c.activation,
            ),
            other => Err(Error::invalid(format!(
                "{other} compressor has no per-coordinate selection law"
            ))),
        }
    }

    /// Sample the next mask of a Rand-m / BanLast / KAWASAKI compressor and record it.
    pub fn next_mask(&mut self) -> Result<CoordinateMask> {
        let p = self.probabilities()?;
        let mask = sample_mask(&p, self.config.m, &mut self.rng)?;
        self.history.push(mask.clone());
        self.step += 1;
        Ok(mask)
    }

    /// Compress `x`, advancing history and random state.
    pub fn compress(&mut self, x: &[f64]) -> Result<Compressed> {
        let d = self.config.d;
        if x.len() != d {
            return Err(Error::invalid(format!(
                "vector of length {} given to a compressor of dimension {d}",
                x.len()
            )));
        }
        match self.config.kind {
            CompressorKind::Identity => Ok(Compressed {
                values: x.to_vec(),
                coords_sent: d,
                bits_sent: d as u64 * DENSE_BITS_PER_COORD,
                mask: None,
            }),
            CompressorKind::Natural => {
                self.step += 1;
                Ok(Compressed {
                    values: baselines::natural_compress(x, &mut self.rng),
                    coords_sent: d,
                    bits_sent: d as u64 * NATURAL_BITS_PER_COORD,
                    mask: None,
                })
            }
            CompressorKind::PermK => {
                let mut shared = rng::derive(self.shared_seed, rng::SHARED_PERMUTATION_STREAM);
                // Every worker replays the same stream to the current round.
                shared.set_word_pos(u128::from(self.step) << 20);
                let masks = baselines::perm_k_masks(d, self.config.workers, true, &mut shared)?;
                let mask = masks[self.config.worker_id].clone();
                self.step += 1;
                let values = scaled_restriction(x, &mask, self.config.workers as f64);
                Ok(Compressed {
                    values,
                    coords_sent: mask.len(),
                    bits_sent: mask.len() as u64 * DENSE_BITS_PER_COORD,
                    mask: Some(mask),
                })
            }
            CompressorKind::RandM | CompressorKind::BanLast | CompressorKind::Kawasaki => {
                let mask = self.next_mask()?;
                let values = sparsify(x, &mask)?;
                Ok(Compressed {
                    values,
                    coords_sent: mask.len(),
                    bits_sent: mask.len() as u64 * DENSE_BITS_PER_COORD,
                    mask: Some(mask),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsify_examples() {
        let mask = CoordinateMask::new(vec![0, 2], 4).unwrap();
        assert_eq!(sparsify(&[1.0, 2.0, 3.0, 4.0], &mask).unwrap(), vec![2.0, 0.0, 6.0, 0.0]);
        let x = [0.5, -1.25, 3.0];
        assert_eq!(sparsify(&x, &CoordinateMask::full(3)).unwrap(), x.to_vec());
        assert_eq!(sparsify(&[0.0; 4], &mask).unwrap(), vec![0.0; 4]);
        assert!(sparsify(&[1.0; 3], &mask).is_err());
    }

    #[test]
    fn identity_leaves_history_alone() {
        let mut s = CompressorState::new(CompressorConfig::identity(3), rng::seeded(0)).unwrap();
        let out = s.compress(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(out.coords_sent, 3);
        assert!(s.history().is_empty());
    }

    #[test]
    fn banlast_construction_rules() {
        assert!(CompressorState::new(CompressorConfig::banlast(4, 2, 1), rng::seeded(0)).is_err());
        assert!(CompressorState::new(CompressorConfig::banlast(5, 2, 1), rng::seeded(0)).is_ok());
        let boundary = CompressorConfig {
            allow_periodic: true,
            ..CompressorConfig::banlast(2, 1, 1)
        };
        assert!(CompressorState::new(boundary, rng::seeded(0)).is_ok());
    }

    #[test]
    fn banlast_boundary_alternates() {
        let config = CompressorConfig {
            allow_periodic: true,
            ..CompressorConfig::banlast(2, 1, 1)
        };
        let mut s = CompressorState::new(config, rng::seeded(5)).unwrap();
        let first = s.next_mask().unwrap().indices()[0];
        for t in 1..50 {
            let j = s.next_mask().unwrap().indices()[0];
            assert_eq!(j, (first + t) % 2);
        }
    }

    #[test]
    fn banlast_never_repeats_recent_coordinates() {
        let mut s = CompressorState::for_run(CompressorConfig::banlast(20, 3, 4), 9).unwrap();
        for _ in 0..2000 {
            let before = s.history().clone();
            let mask = s.next_mask().unwrap();
            assert!(before.iter().all(|old| old.is_disjoint(&mask)));
        }
    }

    #[test]
    fn same_seed_same_masks() {
        let config = CompressorConfig::kawasaki(12, 2, 3, 50.0, Activation::Normalize);
        let run = |seed| {
            let mut s = CompressorState::for_run(config.clone(), seed).unwrap();
            (0..200).map(|_| s.next_mask().unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn zero_history_banlast_matches_rand() {
        let mut a = CompressorState::for_run(CompressorConfig::banlast(30, 3, 0), 4).unwrap();
        let mut b = CompressorState::for_run(CompressorConfig::rand(30, 3), 4).unwrap();
        for _ in 0..100 {
            assert_eq!(a.next_mask().unwrap(), b.next_mask().unwrap());
        }
    }

    #[test]
    fn permk_workers_agree_on_partition() {
        let (d, n) = (23, 4);
        let mut workers: Vec<_> = (0..n)
            .map(|i| CompressorState::for_run(CompressorConfig::permk(d, n, i), 17).unwrap())
            .collect();
        let x: Vec<f64> = (0..d).map(|j| j as f64 + 1.0).collect();
        for _ in 0..20 {
            let outs: Vec<_> = workers.iter_mut().map(|w| w.compress(&x).unwrap()).collect();
            let mut seen = vec![0; d];
            let mut avg = vec![0.0; d];
            for out in &outs {
                for &j in out.mask.as_ref().unwrap().indices() {
                    seen[j] += 1;
                }
                for (a, v) in avg.iter_mut().zip(&out.values) {
                    *a += v / n as f64;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            // Identical inputs aggregate back to x exactly.
            for (a, v) in avg.iter().zip(&x) {
                assert!((a - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = CompressorState::for_run(CompressorConfig::rand(4, 1), 0).unwrap();
        assert!(s.compress(&[1.0; 3]).is_err());
    }
}
