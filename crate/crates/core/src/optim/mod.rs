//! Distributed training loops with compressed gradients.
//!
//! `n` workers each hold a local objective `f_i` and a compressor. Every round
//! they differentiate at the server's point and send compressed gradients,
//! which the server averages in worker order.

mod params;
mod reference;
mod steps;
mod train;

pub use params::{
    amqsgd_params, default_momentum_p, theory_step_size, AmqsgdParams, Regime, TheoryConstants,
};
pub use reference::{reference_minimizer, Reference, DEFAULT_REFERENCE_TOLERANCE};
pub use steps::{
    amqsgd_step, diana_step, mqsgd_step, spawn_workers, AcceleratedState, ServerState,
    StepReport, WorkerState,
};
pub use train::{
    run_training, MetricsRecord, OptimizerKind, StepSchedule, TrainConfig, TrainTrace,
};
