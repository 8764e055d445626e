use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::chain::{mixing_time, ChainLaw, ChainModel, ChainOptions};
use crate::compressors::{CompressorConfig, CompressorKind};
use crate::data::{
    estimate_similarity, gaussian_probes, load_libsvm, serialize_libsvm, Dataset, ShardedProblem,
};
use crate::objective::Objective;
use crate::optim::{
    default_momentum_p, reference_minimizer, run_training, OptimizerKind, Reference, TrainConfig,
    TrainTrace, DEFAULT_REFERENCE_TOLERANCE,
};
use crate::{Error, Result};

/// Environment variable naming the reference-solution cache directory.
pub const CACHE_ENV: &str = "MARKOV_SPARSIFY_CACHE";
pub const CSV_HEADER: [&str; 6] = [
    "t",
    "coords_sent_cum",
    "f_value",
    "fdist_ratio",
    "grad_norm_sq",
    "dist_sq_to_opt",
];
pub const SUMMARY_THRESHOLDS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Mixing accuracy used for `tau` in the default momentum probability.
const TAU_EPS: f64 = 0.05;

/// A loaded, partitioned problem and the key of its reference solution.
#[derive(Clone, Debug)]
pub struct LoadedProblem {
    pub problem: ShardedProblem,
    pub cache_key: String,
}

/// Hex SHA-256 of the dataset text, dimension, shard count, seed and lambda.
pub fn problem_key(dataset: &Dataset, clients: usize, seed: u64, lambda: f64) -> String {
    let mut h = Sha256::new();
    h.update(serialize_libsvm(dataset).as_bytes());
    h.update(format!("dim={};n={clients};seed={seed};lambda={:016x}", dataset.dim(), lambda.to_bits()).as_bytes());
    hex::encode(h.finalize())
}

pub fn load_problem(config: &ExperimentConfig) -> Result<LoadedProblem> {
    let dataset = load_libsvm(&config.data_path, config.dim)?;
    let problem = ShardedProblem::partitioned(&dataset, config.clients, config.lambda, config.seed)?;
    Ok(LoadedProblem {
        cache_key: problem_key(&dataset, config.clients, config.seed, config.lambda),
        problem,
    })
}

fn memo() -> &'static Mutex<HashMap<String, Reference>> {
    static MEMO: OnceLock<Mutex<HashMap<String, Reference>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("markov-sparsify-cache"))
}

fn encode_reference(r: &Reference) -> String {
    let mut out = format!("{:016x}\n{:016x}\n{}\n", r.f_star.to_bits(), r.grad_norm.to_bits(), r.iterations);
    for v in &r.x_star {
        out.push_str(&format!("{:016x}\n", v.to_bits()));
    }
    out
}

fn decode_reference(text: &str, dim: usize) -> Option<Reference> {
    let mut lines = text.lines();
    let bits = |s: Option<&str>| s.and_then(|s| u64::from_str_radix(s, 16).ok()).map(f64::from_bits);
    let f_star = bits(lines.next())?;
    let grad_norm = bits(lines.next())?;
    let iterations = lines.next()?.parse().ok()?;
    let x_star: Vec<f64> = lines.map(|l| bits(Some(l))).collect::<Option<_>>()?;
    (x_star.len() == dim).then_some(Reference {
        x_star,
        f_star,
        grad_norm,
        iterations,
    })
}

/// Reference solution for `problem`, from memory, the cache directory, or a fresh solve.
pub fn cached_reference(problem: &ShardedProblem, key: &str) -> Result<Reference> {
    if let Some(r) = memo().lock().expect("cache lock").get(key) {
        return Ok(r.clone());
    }
    let path = cache_dir().join(format!("{key}.ref"));
    let reference = match std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| decode_reference(&t, problem.dim()))
    {
        Some(r) => r,
        None => {
            let r = reference_minimizer(problem, vec![0.0; problem.dim()], DEFAULT_REFERENCE_TOLERANCE)?;
            let write = std::fs::create_dir_all(cache_dir())
                .and_then(|_| std::fs::write(&path, encode_reference(&r)));
            if let Err(e) = write {
                log::warn!("could not cache reference solution at {}: {e}", path.display());
            }
            r
        }
    };
    memo()
        .lock()
        .expect("cache lock")
        .insert(key.to_string(), reference.clone());
    Ok(reference)
}

/// Mixing time of the compressor chain at `eps = 0.05`, if the chain is small enough to enumerate.
pub fn chain_mixing_time(c: &CompressorConfig) -> Option<usize> {
    let law = match c.kind {
        CompressorKind::BanLast => ChainLaw::BanLast,
        CompressorKind::Kawasaki => ChainLaw::Kawasaki {
            b: c.forgetting_rate,
            activation: c.activation,
        },
        _ => return Some(1),
    };
    let options = ChainOptions {
        allow_sequential_joint_law: true,
        ..Default::default()
    };
    let chain = ChainModel::build(law, c.d, c.m, c.history, options).ok()?;
    mixing_time(&chain, TAU_EPS).ok()
}

/// Training configuration for an experiment on a problem of dimension `d`.
pub fn train_config(config: &ExperimentConfig, problem: &ShardedProblem) -> Result<TrainConfig> {
    let compressor = config.compressor.resolve(problem.dim(), config.clients)?;
    let mut train = TrainConfig::new(config.optimizer, compressor.clone(), config.gamma);
    train.schedule = config.schedule;
    train.alpha_shift = config.alpha_shift;
    train.max_iters = config.iterations;
    train.coord_budget = config.coord_budget;
    train.stop_below = config.stop_below;
    train.seed = config.seed;
    if config.optimizer == OptimizerKind::Amqsgd {
        let mu = match config.mu {
            Some(mu) => mu,
            None => crate::data::strong_convexity_constant(config.lambda)
                .map_err(|e| Error::config("optimizer.mu", e.to_string()))?,
        };
        train.mu = Some(mu);
        train.momentum_p = Some(match config.momentum_p {
            Some(p) => p,
            None => {
                let tau = config
                    .tau
                    .or_else(|| chain_mixing_time(&compressor).map(|t| t.max(1) as f64))
                    .unwrap_or(1.0);
                let probes = gaussian_probes(problem.dim(), 20, 1.0, config.seed);
                let (delta_sq, _) = estimate_similarity(problem, &probes)?;
                default_momentum_p(compressor.d, compressor.m, delta_sq, tau)
            }
        });
    }
    Ok(train)
}

fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Metrics CSV with a fixed header and `\n` line endings.
pub fn write_metrics_csv<W: Write>(trace: &TrainTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            r.coords_sent_cum.to_string(),
            fmt_float(r.f_value),
            r.fdist_ratio.map(fmt_float).unwrap_or_default(),
            fmt_float(r.grad_norm_sq),
            r.dist_sq_to_opt.map(fmt_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub optimizer: OptimizerKind,
    pub compressor: String,
    pub iterations: u64,
    pub coords_sent: u64,
    pub final_f: f64,
    pub final_fdist_ratio: Option<f64>,
    /// `(threshold, coordinates sent when first reached)`.
    pub coords_to: Vec<(f64, Option<u64>)>,
    pub max_momentum_residual: Option<f64>,
}

impl ExperimentSummary {
    pub fn from_trace(trace: &TrainTrace) -> Self {
        let last = trace.last();
        ExperimentSummary {
            optimizer: trace.optimizer,
            compressor: trace.compressor.clone(),
            iterations: last.map_or(0, |r| r.t),
            coords_sent: last.map_or(0, |r| r.coords_sent_cum),
            final_f: last.map_or(f64::NAN, |r| r.f_value),
            final_fdist_ratio: last.and_then(|r| r.fdist_ratio),
            coords_to: SUMMARY_THRESHOLDS
                .iter()
                .map(|&th| (th, trace.coords_to_reach(th)))
                .collect(),
            max_momentum_residual: trace.max_momentum_residual,
        }
    }
}

impl fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "optimizer      {} ({})", self.optimizer, self.compressor)?;
        writeln!(f, "iterations     {}", self.iterations)?;
        writeln!(f, "coords sent    {}", self.coords_sent)?;
        writeln!(f, "final f        {:.12e}", self.final_f)?;
        if let Some(r) = self.final_fdist_ratio {
            writeln!(f, "final f-gap    {r:.3e}")?;
        }
        for (th, c) in &self.coords_to {
            match c {
                Some(c) => writeln!(f, "coords to {th:.0e}  {c}")?,
                None => writeln!(f, "coords to {th:.0e}  not reached")?,
            }
        }
        if let Some(r) = self.max_momentum_residual {
            writeln!(f, "momentum identity residual {r:.2e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub trace: TrainTrace,
    pub summary: ExperimentSummary,
    pub reference: Reference,
}

/// Solve for the reference once, train, and write the metrics CSV if an output path is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let loaded = load_problem(config)?;
    run_loaded(config, &loaded)
}

pub fn run_loaded(config: &ExperimentConfig, loaded: &LoadedProblem) -> Result<ExperimentOutcome> {
    let reference = cached_reference(&loaded.problem, &loaded.cache_key)?;
    let train = train_config(config, &loaded.problem)?;
    let trace = run_training(&loaded.problem, &train, Some(&reference))?;
    if let Some(path) = &config.output {
        write_csv_file(&trace, path)?;
    }
    Ok(ExperimentOutcome {
        summary: ExperimentSummary::from_trace(&trace),
        trace,
        reference,
    })
}

pub fn write_csv_file(trace: &TrainTrace, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_metrics_csv(trace, file)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub coords_to: Vec<(f64, Option<u64>)>,
    pub final_fdist_ratio: Option<f64>,
    pub iterations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Row index with the fewest coordinates to `1e-3`.
    pub best: Option<usize>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["K", "coords_to_1e-2", "coords_to_1e-3", "coords_to_1e-4", "final_fdist_ratio", "best"])?;
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![r.k.to_string()];
            rec.extend(r.coords_to.iter().map(|(_, c)| c.map(|c| c.to_string()).unwrap_or_default()));
            rec.push(r.final_fdist_ratio.map(fmt_float).unwrap_or_default());
            rec.push(if self.best == Some(i) { "*".into() } else { String::new() });
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One run per history size with the shared seed; infeasible sizes are skipped.
pub fn sweep_k(config: &ExperimentConfig, ks: &[usize]) -> Result<SweepTable> {
    let loaded = load_problem(config)?;
    let mut rows = Vec::new();
    for &k in ks {
        let mut c = config.clone();
        c.compressor.k = Some(k);
        c.output = None;
        if let Err(e) = c.compressor.resolve(loaded.problem.dim(), c.clients) {
            log::warn!("skipping K = {k}: {e}");
            continue;
        }
        let outcome = run_loaded(&c, &loaded)?;
        rows.push(SweepRow {
            k,
            coords_to: outcome.summary.coords_to.clone(),
            final_fdist_ratio: outcome.summary.final_fdist_ratio,
            iterations: outcome.summary.iterations,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.coords_to[1].1.map(|c| (c, i)))
        .min()
        .map(|(_, i)| i);
    Ok(SweepTable { rows, best })
}
