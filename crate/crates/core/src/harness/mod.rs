//! Experiment configuration, runs, sweeps and reports behind the CLI.

mod config;
mod experiment;
mod reports;

pub use config::{
    coords_from_percent, load_config, Budget, CompressorSpec, ExperimentConfig, AUTO_K_MAX,
    DEFAULT_CLIENTS, DEFAULT_FORGETTING_RATE, DEFAULT_ITERATIONS, DEFAULT_LAMBDA,
    DEFAULT_PERCENT, DEFAULT_SEED,
};
pub use experiment::{
    cache_dir, cached_reference, chain_mixing_time, load_problem, problem_key, run_experiment,
    run_loaded, sweep_k, train_config, write_csv_file, write_metrics_csv, ExperimentOutcome,
    ExperimentSummary, LoadedProblem, SweepRow, SweepTable, CACHE_ENV, CSV_HEADER,
    SUMMARY_THRESHOLDS,
};
pub use reports::{
    analyze_chain, history_size_report, HistorySizeReport, HistorySizeRow, ChainReport, SIMULATION_M,
};
