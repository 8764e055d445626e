//! TOML experiment configuration.
//!
//! ```toml
//! [data]
//! path = "mushrooms"      # LIBSVM file, relative to this file
//! dim = 112               # optional dimension override
//! clients = 10
//! lambda = 0.05
//! seed = 42
//!
//! [optimizer]
//! kind = "mqsgd"          # mqsgd | amqsgd | diana
//! gamma = 0.5
//! schedule = "constant"   # constant | inv-sqrt
//! # p = 0.1               # amqsgd momentum probability
//! # mu = 0.1              # amqsgd strong convexity, default 2 * lambda
//! # alpha_shift = 0.1     # diana shift rate, default m / d
//! # tau = 3.0             # mixing time for the default p when the chain is too large
//!
//! [compressor]
//! kind = "banlast"        # identity | rand | banlast | kawasaki | permk | natural
//! percent = 10            # or `m = 11`
//! # k = 7                 # history size, default from the hitting-time optimum
//! b = 50.0
//! activation = "normalize"
//!
//! [run]
//! iterations = 2000       # and/or coord_budget
//! # coord_budget = 500000
//! # stop_below = 1e-4
//! output = "metrics.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::chain::optimal_history_size;
use crate::compressors::{Activation, CompressorConfig, CompressorKind};
use crate::optim::{OptimizerKind, StepSchedule};
use crate::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 0.05;
pub const DEFAULT_CLIENTS: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_FORGETTING_RATE: f64 = 50.0;
pub const DEFAULT_PERCENT: f64 = 10.0;
pub const DEFAULT_ITERATIONS: u64 = 1000;
/// Upper limit on the automatically chosen history size.
pub const AUTO_K_MAX: usize = 64;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: RawData,
    optimizer: RawOptimizer,
    #[serde(default)]
    compressor: RawCompressor,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    path: PathBuf,
    dim: Option<usize>,
    clients: Option<usize>,
    lambda: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    kind: String,
    gamma: f64,
    schedule: Option<String>,
    p: Option<f64>,
    mu: Option<f64>,
    alpha_shift: Option<f64>,
    tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompressor {
    kind: Option<String>,
    percent: Option<f64>,
    m: Option<usize>,
    k: Option<usize>,
    b: Option<f64>,
    activation: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    iterations: Option<u64>,
    coord_budget: Option<u64>,
    stop_below: Option<f64>,
    output: Option<PathBuf>,
}

/// Coordinates per round: a percentage of `d` or an explicit count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Percent(f64),
    Count(usize),
}

/// `round(percent * d / 100)`.
pub fn coords_from_percent(percent: f64, d: usize) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::config("compressor.percent", format!("{percent} is outside (0, 100]")));
    }
    let m = (percent * d as f64 / 100.0).round() as usize;
    if m == 0 {
        return Err(Error::config(
            "compressor.percent",
            format!("{percent}% of {d} coordinates rounds to zero"),
        ));
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressorSpec {
    pub kind: CompressorKind,
    pub budget: Budget,
    /// `None` picks the hitting-time optimum for `d / m`.
    pub k: Option<usize>,
    pub b: f64,
    pub activation: Activation,
}

impl CompressorSpec {
    pub fn m_for(&self, d: usize) -> Result<usize> {
        match self.budget {
            Budget::Percent(p) => coords_from_percent(p, d),
            Budget::Count(m) if m >= 1 && m <= d => Ok(m),
            Budget::Count(m) => Err(Error::config("compressor.m", format!("{m} is outside 1..={d}"))),
        }
    }

    /// History size actually used at dimension `d`.
    pub fn k_for(&self, d: usize) -> Result<usize> {
        if !self.kind.is_markovian() {
            return Ok(0);
        }
        if let Some(k) = self.k {
            return Ok(k);
        }
        let alpha = d as f64 / self.m_for(d)? as f64;
        if alpha <= 2.0 {
            return Ok(0);
        }
        optimal_history_size(alpha, AUTO_K_MAX)
    }

    pub fn resolve(&self, d: usize, workers: usize) -> Result<CompressorConfig> {
        let config = match self.kind {
            CompressorKind::Identity => CompressorConfig::identity(d),
            CompressorKind::Natural => CompressorConfig::natural(d),
            CompressorKind::PermK => CompressorConfig::permk(d, workers, 0),
            CompressorKind::RandM => CompressorConfig::rand(d, self.m_for(d)?),
            CompressorKind::BanLast => CompressorConfig::banlast(d, self.m_for(d)?, self.k_for(d)?),
            CompressorKind::Kawasaki => {
                CompressorConfig::kawasaki(d, self.m_for(d)?, self.k_for(d)?, self.b, self.activation)
            }
        };
        config
            .validate()
            .map_err(|e| Error::config("compressor", e.to_string()))?;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    pub dim: Option<usize>,
    pub clients: usize,
    pub lambda: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub gamma: f64,
    pub schedule: StepSchedule,
    pub momentum_p: Option<f64>,
    pub mu: Option<f64>,
    pub alpha_shift: Option<f64>,
    pub tau: Option<f64>,
    pub compressor: CompressorSpec,
    pub iterations: Option<u64>,
    pub coord_budget: Option<u64>,
    pub stop_below: Option<f64>,
    pub output: Option<PathBuf>,
}

fn parse_field<T: std::str::FromStr<Err = Error>>(field: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: Error| Error::config(field, e.to_string()))
}

impl ExperimentConfig {
    /// Parse TOML text; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = message
                .split('`')
                .nth(1)
                .filter(|_| message.contains("unknown field") || message.contains("missing field"))
                .unwrap_or("config")
                .to_string();
            Error::Config { field, message }
        })?;

        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let data_path = resolve(raw.data.path);
        if !data_path.is_file() {
            return Err(Error::config(
                "data.path",
                format!("{} does not exist", data_path.display()),
            ));
        }
        let clients = raw.data.clients.unwrap_or(DEFAULT_CLIENTS);
        if clients == 0 {
            return Err(Error::config("data.clients", "must be at least 1"));
        }
        let lambda = raw.data.lambda.unwrap_or(DEFAULT_LAMBDA);
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config("data.lambda", format!("{lambda} must be non-negative")));
        }
        if raw.data.dim == Some(0) {
            return Err(Error::config("data.dim", "must be positive"));
        }

        let optimizer: OptimizerKind = parse_field("optimizer.kind", &raw.optimizer.kind)?;
        let gamma = raw.optimizer.gamma;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::config("optimizer.gamma", format!("{gamma} must be positive")));
        }
        let schedule = match raw.optimizer.schedule.as_deref() {
            Some(s) => parse_field("optimizer.schedule", s)?,
            None => StepSchedule::Constant,
        };
        if let Some(p) = raw.optimizer.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::config("optimizer.p", format!("{p} is outside (0, 1]")));
            }
        }
        if let Some(mu) = raw.optimizer.mu {
            if !(mu > 0.0) {
                return Err(Error::config("optimizer.mu", format!("{mu} must be positive")));
            }
        }
        if let Some(a) = raw.optimizer.alpha_shift {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::config("optimizer.alpha_shift", format!("{a} is outside [0, 1]")));
            }
        }

        if let Some(tau) = raw.optimizer.tau {
            if !(tau >= 1.0) {
                return Err(Error::config("optimizer.tau", format!("{tau} must be at least 1")));
            }
        }

        let c = raw.compressor;
        let kind: CompressorKind = match c.kind.as_deref() {
            Some(k) => parse_field("compressor.kind", k)?,
            None => CompressorKind::RandM,
        };
        let budget = match (c.percent, c.m) {
            (Some(_), Some(_)) => {
                return Err(Error::config("compressor", "give either `percent` or `m`, not both"))
            }
            (Some(p), None) => {
                if !(p > 0.0 && p <= 100.0) {
                    return Err(Error::config("compressor.percent", format!("{p} is outside (0, 100]")));
                }
                Budget::Percent(p)
            }
            (None, Some(m)) => {
                if m == 0 {
                    return Err(Error::config("compressor.m", "must be at least 1"));
                }
                Budget::Count(m)
            }
            (None, None) => Budget::Percent(DEFAULT_PERCENT),
        };
        let b = c.b.unwrap_or(DEFAULT_FORGETTING_RATE);
        if !(b > 1.0 && b.is_finite()) {
            return Err(Error::config("compressor.b", format!("{b} must exceed 1")));
        }
        let activation = match c.activation.as_deref() {
            Some(a) => parse_field("compressor.activation", a)?,
            None => Activation::Normalize,
        };

        let r = raw.run;
        if r.iterations.is_none() && r.coord_budget.is_none() && r.stop_below.is_none() {
            log::debug!("no stopping rule given; running {DEFAULT_ITERATIONS} iterations");
        }
        if let Some(s) = r.stop_below {
            if !(s > 0.0) {
                return Err(Error::config("run.stop_below", format!("{s} must be positive")));
            }
        }
        let iterations = match (r.iterations, r.coord_budget, r.stop_below) {
            (None, None, None) => Some(DEFAULT_ITERATIONS),
            (it, _, _) => it,
        };

        Ok(ExperimentConfig {
            data_path,
            dim: raw.data.dim,
            clients,
            lambda,
            seed: raw.data.seed.unwrap_or(DEFAULT_SEED),
            optimizer,
            gamma,
            schedule,
            momentum_p: raw.optimizer.p,
            mu: raw.optimizer.mu,
            alpha_shift: raw.optimizer.alpha_shift,
            tau: raw.optimizer.tau,
            compressor: CompressorSpec {
                kind,
                budget,
                k: c.k,
                b,
                activation,
            },
            iterations,
            coord_budget: r.coord_budget,
            stop_below: r.stop_below,
            output: r.output.map(resolve),
        })
    }
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ExperimentConfig::from_toml_str(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with_data() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("toy.svm"), "1 1:1\n-1 2:1\n").unwrap();
        dir
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = dir_with_data();
        let text = "[data]\npath = \"toy.svm\"\n[optimizer]\nkind = \"mqsgd\"\ngamma = 0.5\n";
        let c = ExperimentConfig::from_toml_str(text, dir.path()).unwrap();
        assert_eq!(c.lambda, 0.05);
        assert_eq!(c.clients, 10);
        assert_eq!(c.seed, 42);
        assert_eq!(c.compressor.b, 50.0);
        assert_eq!(c.compressor.activation, Activation::Normalize);
        assert_eq!(c.compressor.budget, Budget::Percent(10.0));
        assert_eq!(c.data_path, dir.path().join("toy.svm"));
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(coords_from_percent(10.0, 112).unwrap(), 11);
        assert!(matches!(
            coords_from_percent(0.0, 112),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = dir_with_data();
        let base = "[data]\npath = \"toy.svm\"\n[optimizer]\nkind = \"mqsgd\"\ngamma = 0.5\n";
        let cases = [
            (format!("{base}[compressor]\npercent = 0\n"), "compressor.percent"),
            (format!("{base}[compressor]\ncolour = 1\n"), "colour"),
            ("[data]\npath = \"missing.svm\"\n[optimizer]\nkind = \"mqsgd\"\ngamma = 0.5\n".into(), "data.path"),
            (format!("{base}[compressor]\nkind = \"topk\"\n"), "compressor.kind"),
        ];
        for (text, field) in cases {
            match ExperimentConfig::from_toml_str(&text, dir.path()) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn auto_history_size() {
        let spec = CompressorSpec {
            kind: CompressorKind::BanLast,
            budget: Budget::Percent(10.0),
            k: None,
            b: 50.0,
            activation: Activation::Normalize,
        };
        assert_eq!(spec.m_for(112).unwrap(), 11);
        let k = spec.k_for(112).unwrap();
        assert_eq!(k, optimal_history_size(112.0 / 11.0, AUTO_K_MAX).unwrap());
        let c = spec.resolve(112, 10).unwrap();
        assert_eq!((c.m, c.history), (11, k));
    }
}
