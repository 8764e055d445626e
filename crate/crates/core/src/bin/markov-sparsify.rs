use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use markov_sparsify::chain::{
    expected_hitting_time_banlast, expected_hitting_time_banlast_exact, expected_hitting_time_randm,
    monte_carlo_hitting_time, optimal_history_size, zero_intercept_slope, ChainLaw, ALPHA_GRID,
};
use markov_sparsify::compressors::{Activation, CompressorConfig};
use markov_sparsify::harness::{
    analyze_chain, history_size_report, load_config, run_experiment, sweep_k, ChainReport,
    ExperimentConfig, SIMULATION_M,
};
use markov_sparsify::{Error, Result};

#[derive(Parser)]
#[command(name = "markov-sparsify", version, about = "Markovian sparsification: chains, hitting times and compressed training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Rand,
    Banlast,
    Kawasaki,
}

#[derive(clap::Args)]
struct Overrides {
    /// LIBSVM data file, replaces `data.path`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Metrics CSV path, replaces `run.output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, c: &mut ExperimentConfig) -> Result<()> {
        if let Some(p) = self.data {
            if !p.is_file() {
                return Err(Error::config("data.path", format!("{} does not exist", p.display())));
            }
            c.data_path = p;
        }
        if let Some(d) = self.dim {
            c.dim = Some(d);
        }
        if let Some(n) = self.clients {
            if n == 0 {
                return Err(Error::config("data.clients", "must be at least 1"));
            }
            c.clients = n;
        }
        if let Some(l) = self.lambda {
            if l < 0.0 || !l.is_finite() {
                return Err(Error::config("data.lambda", "must be finite and non-negative"));
            }
            c.lambda = l;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = self.output {
            c.output = Some(o);
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its metrics CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train once per history size and tabulate coordinates to each threshold.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8")]
        k: Vec<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build the exact chain and report stationarity, mixing time and bounds.
    AnalyzeChain {
        #[arg(long, value_enum)]
        compressor: LawArg,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 50.0)]
        b: f64,
        #[arg(long, default_value = "normalize")]
        activation: Activation,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Expected rounds until a fixed coordinate is sent.
    HittingTime {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        k: usize,
        /// Monte-Carlo trials with m = 10, d = round(10 alpha); 0 skips simulation.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// History size minimising the BanLast hitting time for each alpha.
    OptimalK {
        #[arg(long, value_delimiter = ',')]
        alpha_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = usize::MAX)]
        k_max: usize,
    },
    /// Optimal-history table, linear fit and hitting-time curves as CSV.
    HistoryReport {
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `history_table.csv` and `history_curves.csv`; stdout otherwise.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load_with(config: &Path, overrides: Overrides) -> Result<ExperimentConfig> {
    let mut c = load_config(config)?;
    overrides.apply(&mut c)?;
    Ok(c)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    match cli.command {
        Command::Train { config, overrides } => {
            let c = load_with(&config, overrides)?;
            let outcome = run_experiment(&c)?;
            print!("{}", outcome.summary);
            if let Some(p) = &c.output {
                println!("metrics        {}", p.display());
            }
        }
        Command::SweepK { config, k, overrides } => {
            let c = load_with(&config, overrides)?;
            let table = sweep_k(&c, &k)?;
            table.write_csv(stdout.lock())?;
        }
        Command::AnalyzeChain { compressor, d, m, k, b, activation, eps } => {
            let law = match compressor {
                LawArg::Rand => ChainLaw::RandM,
                LawArg::Banlast => ChainLaw::BanLast,
                LawArg::Kawasaki => ChainLaw::Kawasaki { b, activation },
            };
            let r = analyze_chain(law, d, m, k, eps)?;
            println!("law            {law:?}");
            println!("states         {} ({} recurrent, {} unreachable)", r.states, r.recurrent, r.unreachable);
            println!("max |pi - u|   {:.3e}", r.pi_max_dev);
            println!("tau_mix({eps})  {}", r.tau_mix);
            match r.bound {
                Some(bd) => println!("bound          rho = {}, C = {}", bd.rho, bd.c),
                None => println!("bound          outside validity regime"),
            }
            println!();
            let mut w = csv_writer(stdout.lock());
            w.write_record(ChainReport::CSV_HEADER)?;
            w.write_record(r.csv_record())?;
            w.flush()?;
        }
        Command::HittingTime { alpha, k, trials, seed } => {
            println!("rand-m         {}", expected_hitting_time_randm(alpha)?);
            match expected_hitting_time_banlast(alpha, k) {
                Ok(v) => println!("banlast        {v}"),
                Err(e) => println!("banlast        {e}"),
            }
            println!("banlast exact  {}", expected_hitting_time_banlast_exact(alpha, k)?);
            if trials > 0 {
                let d = (alpha * SIMULATION_M as f64).round() as usize;
                let est = monte_carlo_hitting_time(&CompressorConfig::banlast(d, SIMULATION_M, k), 0, trials, seed)?;
                println!(
                    "simulated      {} +- {} (d = {d}, m = {SIMULATION_M}, {} trials)",
                    est.mean, est.stderr, est.trials
                );
            }
        }
        Command::OptimalK { alpha_grid, k_max } => {
            let grid = alpha_grid.unwrap_or_else(|| ALPHA_GRID.to_vec());
            let mut w = csv_writer(stdout.lock());
            w.write_record(["alpha", "K_star", "banlast", "randm"])?;
            let mut ks = Vec::with_capacity(grid.len());
            for &a in &grid {
                let k = optimal_history_size(a, k_max)?;
                ks.push(k as f64);
                w.write_record([
                    a.to_string(),
                    k.to_string(),
                    expected_hitting_time_banlast(a, k)?.to_string(),
                    expected_hitting_time_randm(a)?.to_string(),
                ])?;
            }
            w.flush()?;
            drop(w);
            println!("# slope {}", zero_intercept_slope(&grid, &ks));
        }
        Command::HistoryReport { trials, seed, out_dir } => {
            let report = history_size_report(trials, seed)?;
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    report.write_table_csv(std::fs::File::create(dir.join("history_table.csv"))?)?;
                    report.write_curves_csv(std::fs::File::create(dir.join("history_curves.csv"))?)?;
                    println!("slope {}", report.slope);
                }
                None => {
                    report.write_table_csv(stdout.lock())?;
                    println!();
                    report.write_curves_csv(stdout.lock())?;
                    println!("# slope {}", report.slope);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
