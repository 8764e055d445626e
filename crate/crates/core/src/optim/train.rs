use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::params::amqsgd_params;
use super::reference::Reference;
use super::steps::{amqsgd_step, diana_step, mqsgd_step, spawn_workers, AcceleratedState, ServerState, StepReport};
use crate::compressors::CompressorConfig;
use crate::objective::Objective;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OptimizerKind {
    #[default]
    Mqsgd,
    Amqsgd,
    Diana,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Mqsgd => "mqsgd",
            OptimizerKind::Amqsgd => "amqsgd",
            OptimizerKind::Diana => "diana",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mqsgd" | "qsgd" => Ok(OptimizerKind::Mqsgd),
            "amqsgd" | "accelerated" => Ok(OptimizerKind::Amqsgd),
            "diana" => Ok(OptimizerKind::Diana),
            other => Err(Error::invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepSchedule {
    #[default]
    Constant,
    /// `gamma_t = gamma / sqrt(t + 1)`.
    InvSqrt,
}

impl StepSchedule {
    pub fn at(self, gamma: f64, t: u64) -> f64 {
        match self {
            StepSchedule::Constant => gamma,
            StepSchedule::InvSqrt => gamma / ((t + 1) as f64).sqrt(),
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepSchedule::Constant => "constant",
            StepSchedule::InvSqrt => "inv-sqrt",
        })
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(StepSchedule::Constant),
            "inv-sqrt" | "inv_sqrt" => Ok(StepSchedule::InvSqrt),
            other => Err(Error::invalid(format!("unknown schedule `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    /// Compressor template; each worker gets its own copy and stream.
    pub compressor: CompressorConfig,
    pub gamma: f64,
    pub schedule: StepSchedule,
    /// Accelerated method only.
    pub momentum_p: Option<f64>,
    pub mu: Option<f64>,
    /// DIANA only; defaults to `m / d`.
    pub alpha_shift: Option<f64>,
    pub max_iters: Option<u64>,
    pub coord_budget: Option<u64>,
    /// Stop once the normalised gap reaches this value.
    pub stop_below: Option<f64>,
    pub seed: u64,
    /// Starting point; zero when absent.
    pub x0: Option<Vec<f64>>,
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerKind, compressor: CompressorConfig, gamma: f64) -> Self {
        TrainConfig {
            optimizer,
            compressor,
            gamma,
            schedule: StepSchedule::Constant,
            momentum_p: None,
            mu: None,
            alpha_shift: None,
            max_iters: None,
            coord_budget: None,
            stop_below: None,
            seed: 0,
            x0: None,
        }
    }

    pub fn effective_alpha_shift(&self) -> f64 {
        self.alpha_shift
            .unwrap_or(self.compressor.m as f64 / self.compressor.d as f64)
    }
}

/// Metrics at one iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub t: u64,
    pub coords_sent_cum: u64,
    pub f_value: f64,
    pub fdist_ratio: Option<f64>,
    pub grad_norm_sq: f64,
    pub dist_sq_to_opt: Option<f64>,
    /// Seconds since the run started; not part of any deterministic output.
    pub wallclock: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub optimizer: OptimizerKind,
    pub compressor: String,
    pub schedule: StepSchedule,
    pub gamma: f64,
    pub records: Vec<MetricsRecord>,
    /// Largest per-step residual of the accelerated convex-combination identity.
    pub max_momentum_residual: Option<f64>,
    pub final_point: Vec<f64>,
}

impl TrainTrace {
    /// Coordinates sent when `fdist_ratio` first drops to `threshold`.
    pub fn coords_to_reach(&self, threshold: f64) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.fdist_ratio.is_some_and(|v| v <= threshold))
            .map(|r| r.coords_sent_cum)
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }
}

struct Recorder<'a> {
    reference: Option<&'a Reference>,
    f0: Option<f64>,
    start: Instant,
}

impl Recorder<'_> {
    fn record(&mut self, t: u64, coords: u64, x: &[f64], loss: f64, grad: &[f64]) -> Result<MetricsRecord> {
        let grad_norm_sq: f64 = grad.iter().map(|g| g * g).sum();
        if !loss.is_finite() || !grad_norm_sq.is_finite() {
            return Err(Error::Diverged { t, partial: None });
        }
        let f0 = *self.f0.get_or_insert(loss);
        let (fdist_ratio, dist_sq_to_opt) = match self.reference {
            Some(r) => {
                let denom = f0 - r.f_star;
                let ratio = if denom > 0.0 { (loss - r.f_star) / denom } else { 0.0 };
                let dist = x.iter().zip(&r.x_star).map(|(a, b)| (a - b).powi(2)).sum();
                (Some(ratio), Some(dist))
            }
            None => (None, None),
        };
        Ok(MetricsRecord {
            t,
            coords_sent_cum: coords,
            f_value: loss,
            fdist_ratio,
            grad_norm_sq,
            dist_sq_to_opt,
            wallclock: self.start.elapsed().as_secs_f64(),
        })
    }
}

enum Server {
    Plain(ServerState),
    Accelerated(AcceleratedState),
}

impl Server {
    /// The iterate whose metrics are reported.
    fn point(&self) -> &[f64] {
        match self {
            Server::Plain(s) => &s.x,
            Server::Accelerated(s) => &s.x_f,
        }
    }
}

/// Run the configured optimizer until the iteration cap, coordinate budget or
/// target gap is reached, recording metrics at every iterate.
pub fn run_training<O: Objective + ?Sized>(
    problem: &O,
    config: &TrainConfig,
    reference: Option<&Reference>,
) -> Result<TrainTrace> {
    let d = problem.dim();
    let n = problem.workers();
    if config.compressor.d != d {
        return Err(Error::invalid(format!(
            "compressor dimension {} differs from problem dimension {d}",
            config.compressor.d
        )));
    }
    if config.max_iters.is_none() && config.coord_budget.is_none() && config.stop_below.is_none() {
        return Err(Error::invalid("set an iteration cap, coordinate budget or target gap"));
    }
    if !(config.gamma > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {}", config.gamma)));
    }
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    if x0.len() != d {
        return Err(Error::invalid("starting point has the wrong dimension"));
    }
    let mut workers = spawn_workers(
        &config.compressor,
        n,
        config.seed,
        config.optimizer == OptimizerKind::Diana,
    )?;
    let (mu, p) = match config.optimizer {
        OptimizerKind::Amqsgd => {
            let mu = config
                .mu
                .ok_or_else(|| Error::invalid("the accelerated method needs mu"))?;
            let p = config.momentum_p.unwrap_or(1.0);
            amqsgd_params(mu, config.gamma, p)?;
            (mu, p)
        }
        _ => (0.0, 1.0),
    };
    let mut server = match config.optimizer {
        OptimizerKind::Amqsgd => Server::Accelerated(AcceleratedState::new(x0)),
        _ => Server::Plain(ServerState::new(x0)),
    };

    let mut recorder = Recorder {
        reference,
        f0: None,
        start: Instant::now(),
    };
    let mut trace = TrainTrace {
        optimizer: config.optimizer,
        compressor: config.compressor.kind.to_string(),
        schedule: config.schedule,
        gamma: config.gamma,
        records: Vec::new(),
        max_momentum_residual: None,
        final_point: Vec::new(),
    };
    let mut coords: u64 = 0;
    let mut t: u64 = 0;

    let outcome: Result<()> = (|| loop {
        let out_of_iters = config.max_iters.is_some_and(|cap| t >= cap);
        let out_of_budget = config.coord_budget.is_some_and(|b| coords >= b);
        if out_of_iters || out_of_budget {
            let x = server.point().to_vec();
            let (loss, grad) = problem.loss_grad(&x);
            trace.records.push(recorder.record(t, coords, &x, loss, &grad)?);
            return Ok(());
        }
        let gamma = config.schedule.at(config.gamma, t);
        let x = server.point().to_vec();
        let report: StepReport = match &mut server {
            Server::Plain(s) => match config.optimizer {
                OptimizerKind::Diana => {
                    diana_step(problem, s, &mut workers, gamma, config.effective_alpha_shift())?
                }
                _ => mqsgd_step(problem, s, &mut workers, gamma)?,
            },
            Server::Accelerated(s) => {
                let (loss, grad) = problem.loss_grad(&x);
                let record = recorder.record(t, coords, &x, loss, &grad)?;
                let params = amqsgd_params(mu, gamma, p)?;
                let r = amqsgd_step(problem, s, &mut workers, &params)?;
                let res = r.momentum_residual.unwrap_or(0.0);
                trace.max_momentum_residual = Some(trace.max_momentum_residual.map_or(res, |m: f64| m.max(res)));
                trace.records.push(record);
                StepReport { loss, grad: Vec::new(), ..r }
            }
        };
        if let Server::Plain(_) = server {
            trace.records.push(recorder.record(t, coords, &x, report.loss, &report.grad)?);
        }
        let reached = trace
            .records
            .last()
            .and_then(|r| r.fdist_ratio)
            .zip(config.stop_below)
            .is_some_and(|(ratio, target)| ratio <= target);
        if reached {
            return Ok(());
        }
        coords += report.coords_sent;
        t += 1;
    })();

    trace.final_point = server.point().to_vec();
    match outcome {
        Ok(()) => Ok(trace),
        Err(Error::Diverged { t, .. }) => Err(Error::Diverged {
            t,
            partial: Some(Box::new(trace)),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::QuadraticProblem;
    use crate::optim::reference_minimizer;

    fn quad() -> QuadraticProblem {
        QuadraticProblem::new(
            vec![vec![1.0, 2.0, 0.5, 1.0]; 2],
            vec![vec![1.0, 0.0, -1.0, 2.0], vec![0.0, 1.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn zero_iterations_records_start() {
        let q = quad();
        let mut c = TrainConfig::new(OptimizerKind::Mqsgd, CompressorConfig::rand(4, 1), 0.1);
        c.max_iters = Some(0);
        let r = reference_minimizer(&q, vec![0.0; 4], 1e-12).unwrap();
        let trace = run_training(&q, &c, Some(&r)).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].fdist_ratio, Some(1.0));
        assert_eq!(trace.records[0].coords_sent_cum, 0);
    }

    #[test]
    fn reproducible_and_counts_coordinates() {
        let q = quad();
        for opt in [OptimizerKind::Mqsgd, OptimizerKind::Diana, OptimizerKind::Amqsgd] {
            let mut c = TrainConfig::new(opt, CompressorConfig::banlast(4, 1, 2), 0.05);
            c.max_iters = Some(30);
            c.mu = Some(0.5);
            c.seed = 9;
            let a = run_training(&q, &c, None).unwrap();
            let b = run_training(&q, &c, None).unwrap();
            assert_eq!(a.records.len(), 31);
            for (x, y) in a.records.iter().zip(&b.records) {
                assert_eq!((x.t, x.coords_sent_cum, x.f_value.to_bits()), (y.t, y.coords_sent_cum, y.f_value.to_bits()));
                assert_eq!(x.coords_sent_cum, x.t * 2);
            }
        }
    }

    #[test]
    fn budget_stops_run() {
        let q = quad();
        let mut c = TrainConfig::new(OptimizerKind::Mqsgd, CompressorConfig::rand(4, 2), 0.1);
        c.coord_budget = Some(40);
        let trace = run_training(&q, &c, None).unwrap();
        assert_eq!(trace.last().unwrap().coords_sent_cum, 40);
        assert_eq!(trace.last().unwrap().t, 10);
    }

    #[test]
    fn divergence_keeps_partial_trace() {
        let q = quad();
        let mut c = TrainConfig::new(OptimizerKind::Mqsgd, CompressorConfig::identity(4), 50.0);
        c.max_iters = Some(10_000);
        match run_training(&q, &c, None) {
            Err(Error::Diverged { partial: Some(p), t }) => {
                assert!(!p.records.is_empty());
                assert!(t > 0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn inv_sqrt_schedule() {
        assert_eq!(StepSchedule::InvSqrt.at(2.0, 3), 1.0);
        assert_eq!(StepSchedule::Constant.at(2.0, 3), 2.0);
    }
}
