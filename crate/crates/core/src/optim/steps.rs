use rayon::prelude::*;

use super::params::AmqsgdParams;
use crate::compressors::{Compressed, CompressorConfig, CompressorState};
use crate::objective::Objective;
use crate::{Error, Result};

/// One worker: its compressor and, for DIANA, its gradient shift.
#[derive(Clone, Debug)]
pub struct WorkerState {
    pub compressor: CompressorState,
    pub shift: Option<Vec<f64>>,
}

impl WorkerState {
    pub fn new(compressor: CompressorState) -> Self {
        WorkerState {
            compressor,
            shift: None,
        }
    }

    pub fn with_shift(compressor: CompressorState) -> Self {
        let d = compressor.config().d;
        WorkerState {
            compressor,
            shift: Some(vec![0.0; d]),
        }
    }
}

/// `n` workers for a run with master seed `seed`, each on its own stream.
pub fn spawn_workers(template: &CompressorConfig, n: usize, seed: u64, shifts: bool) -> Result<Vec<WorkerState>> {
    (0..n)
        .map(|i| {
            let state = CompressorState::for_run(template.for_worker(n, i), seed)?;
            Ok(if shifts {
                WorkerState::with_shift(state)
            } else {
                WorkerState::new(state)
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServerState {
    pub x: Vec<f64>,
    pub t: u64,
}

impl ServerState {
    pub fn new(x: Vec<f64>) -> Self {
        ServerState { x, t: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcceleratedState {
    pub x: Vec<f64>,
    pub x_f: Vec<f64>,
    pub x_g: Vec<f64>,
    pub t: u64,
}

impl AcceleratedState {
    pub fn new(x0: Vec<f64>) -> Self {
        AcceleratedState {
            x_f: x0.clone(),
            x_g: x0.clone(),
            x: x0,
            t: 0,
        }
    }
}

/// Outcome of one server round.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub coords_sent: u64,
    /// `f` and `grad f` at the point the workers differentiated.
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Accelerated steps only: scaled residual of the convex-combination identity.
    pub momentum_residual: Option<f64>,
}

struct Aggregate {
    coords_sent: u64,
    loss: f64,
    grad: Vec<f64>,
    message: Vec<f64>,
}

/// Every worker differentiates at `point` and sends `encode(worker, grad)`;
/// the server averages gradients and messages in worker order.
fn round<O, F>(problem: &O, workers: &mut [WorkerState], point: &[f64], t: u64, encode: F) -> Result<Aggregate>
where
    O: Objective + ?Sized,
    F: Fn(&mut WorkerState, &[f64]) -> Result<Compressed> + Sync,
{
    let n = workers.len();
    if n != problem.workers() {
        return Err(Error::invalid(format!(
            "{n} worker states for a problem with {} workers",
            problem.workers()
        )));
    }
    let results: Vec<Result<(f64, Vec<f64>, Compressed)>> = workers
        .par_iter_mut()
        .enumerate()
        .map(|(i, w)| {
            let (loss, grad) = problem.local_loss_grad(i, point);
            let sent = encode(w, &grad)?;
            Ok((loss, grad, sent))
        })
        .collect();
    let d = point.len();
    let mut agg = Aggregate {
        coords_sent: 0,
        loss: 0.0,
        grad: vec![0.0; d],
        message: vec![0.0; d],
    };
    for r in results {
        let (loss, grad, sent) = r?;
        agg.loss += loss;
        agg.coords_sent += sent.coords_sent as u64;
        for j in 0..d {
            agg.grad[j] += grad[j];
            agg.message[j] += sent.values[j];
        }
    }
    let inv = 1.0 / n as f64;
    agg.loss *= inv;
    agg.grad.iter_mut().for_each(|v| *v *= inv);
    agg.message.iter_mut().for_each(|v| *v *= inv);
    if !agg.loss.is_finite() || agg.message.iter().chain(&agg.grad).any(|v| !v.is_finite()) {
        return Err(Error::Diverged { t, partial: None });
    }
    Ok(agg)
}

/// `x <- x - gamma (1/n) sum_i Q_i(grad f_i(x))`.
pub fn mqsgd_step<O: Objective + ?Sized>(
    problem: &O,
    server: &mut ServerState,
    workers: &mut [WorkerState],
    gamma: f64,
) -> Result<StepReport> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {gamma}")));
    }
    let agg = round(problem, workers, &server.x, server.t, |w, g| w.compressor.compress(g))?;
    for (x, g) in server.x.iter_mut().zip(&agg.message) {
        *x -= gamma * g;
    }
    server.t += 1;
    Ok(StepReport {
        coords_sent: agg.coords_sent,
        loss: agg.loss,
        grad: agg.grad,
        momentum_residual: None,
    })
}

/// One accelerated round. The report's `loss`/`grad` are taken at `x_g`.
pub fn amqsgd_step<O: Objective + ?Sized>(
    problem: &O,
    state: &mut AcceleratedState,
    workers: &mut [WorkerState],
    params: &AmqsgdParams,
) -> Result<StepReport> {
    let AmqsgdParams {
        gamma,
        p,
        beta,
        eta,
        theta,
    } = *params;
    for j in 0..state.x.len() {
        state.x_g[j] = theta * state.x_f[j] + (1.0 - theta) * state.x[j];
    }
    let agg = round(problem, workers, &state.x_g, state.t, |w, g| w.compressor.compress(g))?;

    let mut residual: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for j in 0..state.x.len() {
        let (x, x_f, x_g) = (state.x[j], state.x_f[j], state.x_g[j]);
        let x_f_next = x_g - p * gamma * agg.message[j];
        let x_next = eta * x_f_next + (p - eta) * x_f + (1.0 - p) * (1.0 - beta) * x + (1.0 - p) * beta * x_g;
        let lhs = eta * x_g + (p - eta) * x_f + (1.0 - p) * (1.0 - beta) * x + (1.0 - p) * beta * x_g;
        let rhs = beta * x_g + (1.0 - beta) * x;
        residual = residual.max((lhs - rhs).abs());
        scale = scale.max(rhs.abs()).max(eta * x_g.abs()).max((p - eta).abs() * x_f.abs());
        state.x_f[j] = x_f_next;
        state.x[j] = x_next;
    }
    if state.x.iter().chain(&state.x_f).any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            t: state.t,
            partial: None,
        });
    }
    state.t += 1;
    Ok(StepReport {
        coords_sent: agg.coords_sent,
        loss: agg.loss,
        grad: agg.grad,
        momentum_residual: Some(residual / scale),
    })
}

/// `Delta_i = Q_i(grad f_i - h_i)`, `g = (1/n) sum (h_i + Delta_i)`,
/// `h_i += alpha Delta_i`, `x <- x - gamma g`.
pub fn diana_step<O: Objective + ?Sized>(
    problem: &O,
    server: &mut ServerState,
    workers: &mut [WorkerState],
    gamma: f64,
    alpha_shift: f64,
) -> Result<StepReport> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("step size must be positive, got {gamma}")));
    }
    if !(alpha_shift >= 0.0) {
        return Err(Error::invalid(format!("shift rate must be non-negative, got {alpha_shift}")));
    }
    let agg = round(problem, workers, &server.x, server.t, |w, g| {
        let d = g.len();
        let shift = w.shift.get_or_insert_with(|| vec![0.0; d]);
        let diff: Vec<f64> = g.iter().zip(shift.iter()).map(|(a, h)| a - h).collect();
        let delta = w.compressor.compress(&diff)?;
        let mut message = delta.clone();
        for j in 0..d {
            message.values[j] = shift[j] + delta.values[j];
            shift[j] += alpha_shift * delta.values[j];
        }
        Ok(message)
    })?;
    for (x, g) in server.x.iter_mut().zip(&agg.message) {
        *x -= gamma * g;
    }
    server.t += 1;
    Ok(StepReport {
        coords_sent: agg.coords_sent,
        loss: agg.loss,
        grad: agg.grad,
        momentum_residual: None,
    })
}
