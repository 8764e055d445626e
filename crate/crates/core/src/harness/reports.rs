use std::io::Write;

use crate::chain::{
    expected_hitting_time_banlast, expected_hitting_time_banlast_exact, expected_hitting_time_randm,
    mixing_time_from, monte_carlo_hitting_time, optimal_history_size, rho_bound_banlast,
    rho_bound_kawasaki_normalize, stationary_distribution, zero_intercept_slope, ChainLaw,
    ChainModel, ChainOptions, ErgodicityBound, HittingEstimate, ALPHA_GRID,
    DEFAULT_ITERATION_CAP,
};
use crate::compressors::{Activation, CompressorConfig};
use crate::Result;

/// Coordinates per round used when simulating a given `alpha`.
pub const SIMULATION_M: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub law: ChainLaw,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub states: usize,
    pub recurrent: usize,
    pub unreachable: usize,
    pub pi_max_dev: f64,
    pub tau_mix: usize,
    pub bound: Option<ErgodicityBound>,
}

/// Build the exact chain, then report stationarity, mixing time and the applicable bound.
pub fn analyze_chain(law: ChainLaw, d: usize, m: usize, k: usize, eps: f64) -> Result<ChainReport> {
    let options = ChainOptions {
        allow_sequential_joint_law: true,
        ..Default::default()
    };
    let chain = ChainModel::build(law, d, m, k, options)?;
    let st = stationary_distribution(&chain)?;
    let tau_mix = mixing_time_from(&chain, &st, eps, DEFAULT_ITERATION_CAP)?;
    let bound = match law {
        ChainLaw::BanLast => rho_bound_banlast(d, m, k).ok(),
        ChainLaw::Kawasaki {
            b,
            activation: Activation::Normalize,
        } => rho_bound_kawasaki_normalize(d, m, k, b).ok(),
        _ => None,
    };
    Ok(ChainReport {
        law,
        d,
        m,
        k,
        states: chain.num_states(),
        recurrent: st.class.states.len(),
        unreachable: st.class.unreachable,
        pi_max_dev: st.max_deviation_from_uniform(),
        tau_mix,
        bound,
    })
}

impl ChainReport {
    pub const CSV_HEADER: [&'static str; 9] = ["d", "m", "K", "b", "states", "pi_max_dev", "tau_mix", "rho", "C"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            self.law.forgetting_rate().map(|b| b.to_string()).unwrap_or_default(),
            self.states.to_string(),
            format!("{:e}", self.pi_max_dev),
            self.tau_mix.to_string(),
            self.bound.map(|b| b.rho.to_string()).unwrap_or_default(),
            self.bound.map(|b| b.c.to_string()).unwrap_or_default(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistorySizeRow {
    pub alpha: f64,
    pub k_star: usize,
    pub randm: f64,
    pub banlast_formula: f64,
    pub banlast_exact: f64,
    pub simulated: Option<HittingEstimate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistorySizeReport {
    pub rows: Vec<HistorySizeRow>,
    /// Least-squares slope of `K*` against `alpha` through the origin.
    pub slope: f64,
    /// `(alpha, K, formula, exact)` over every admissible `K`.
    pub curves: Vec<(f64, usize, f64, f64)>,
}

/// Optimal history sizes over the alpha grid, the linear fit, and hitting-time
/// curves. With `trials > 0` each optimum is also simulated with
/// `m = 10, d = round(10 alpha)`.
pub fn history_size_report(trials: u64, seed: u64) -> Result<HistorySizeReport> {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for alpha in ALPHA_GRID {
        let k_star = optimal_history_size(alpha, usize::MAX)?;
        let simulated = if trials > 0 {
            let d = (alpha * SIMULATION_M as f64).round() as usize;
            let config = CompressorConfig::banlast(d, SIMULATION_M, k_star);
            Some(monte_carlo_hitting_time(&config, 0, trials, seed)?)
        } else {
            None
        };
        rows.push(HistorySizeRow {
            alpha,
            k_star,
            randm: expected_hitting_time_randm(alpha)?,
            banlast_formula: expected_hitting_time_banlast(alpha, k_star)?,
            banlast_exact: expected_hitting_time_banlast_exact(alpha, k_star)?,
            simulated,
        });
        for k in 0..=(alpha.ceil() as usize - 2) {
            curves.push((
                alpha,
                k,
                expected_hitting_time_banlast(alpha, k)?,
                expected_hitting_time_banlast_exact(alpha, k)?,
            ));
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.k_star as f64).collect();
    Ok(HistorySizeReport {
        slope: zero_intercept_slope(&xs, &ys),
        rows,
        curves,
    })
}

impl HistorySizeReport {
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["alpha", "K_star", "randm", "banlast_formula", "banlast_exact", "mc_mean", "mc_stderr"])?;
        for r in &self.rows {
            w.write_record([
                r.alpha.to_string(),
                r.k_star.to_string(),
                r.randm.to_string(),
                r.banlast_formula.to_string(),
                r.banlast_exact.to_string(),
                r.simulated.map(|s| s.mean.to_string()).unwrap_or_default(),
                r.simulated.map(|s| s.stderr.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_curves_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["alpha", "K", "randm", "banlast_formula", "banlast_exact"])?;
        for &(alpha, k, formula, exact) in &self.curves {
            w.write_record([
                alpha.to_string(),
                k.to_string(),
                alpha.to_string(),
                formula.to_string(),
                exact.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_size_table_without_simulation() {
        let report = history_size_report(0, 0).unwrap();
        assert_eq!(report.rows.len(), ALPHA_GRID.len());
        let ten = report.rows.iter().find(|r| r.alpha == 10.0).unwrap();
        assert_eq!(ten.randm, 10.0);
        assert_eq!(ten.k_star, 7);
        assert!((ten.banlast_formula - 3.4).abs() < 0.1);
        assert!(report.slope > 0.6 && report.slope < 0.85, "{}", report.slope);
    }

    #[test]
    fn chain_report_row() {
        let r = analyze_chain(ChainLaw::BanLast, 4, 1, 1, 0.01).unwrap();
        assert_eq!(r.states, 4);
        assert!(r.pi_max_dev < 1e-12);
        let rec = r.csv_record();
        assert_eq!(rec.len(), ChainReport::CSV_HEADER.len());
        assert_eq!(rec[3], "");
    }
}
