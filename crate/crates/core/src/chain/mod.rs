//! Exact analysis of the mask chain.
//!
//! A Markovian sparsifier with history `K` is a Markov chain whose state is the
//! ordered tuple of its last `K` masks. For small `(d, m, K)` the chain is
//! enumerated, its transition matrix built from the compressor's own
//! probability routine, and its stationary law, mixing time and geometric
//! ergodicity constants computed directly.

mod analysis;
mod bounds;
mod hitting;
mod model;

pub use analysis::{
    check_ergodic, deviation_curve, mixing_time, mixing_time_from, mixing_time_with,
    newest_mask_marginal, stationary_distribution, stationary_distribution_with,
    DeviationTracker, RecurrentClass, StationaryDistribution, DEFAULT_ITERATION_CAP,
    STATIONARY_RESIDUAL,
};
pub use bounds::{rho_bound_banlast, rho_bound_kawasaki_normalize, ErgodicityBound};
pub use hitting::{
    expected_hitting_time_banlast, expected_hitting_time_banlast_exact,
    expected_hitting_time_randm, monte_carlo_hitting_time, optimal_history_size,
    zero_intercept_slope, HittingEstimate, ALPHA_GRID,
};
pub use model::{
    enumerate_masks, enumerate_states, state_count, ChainLaw, ChainModel, ChainOptions,
    DEFAULT_STATE_CAP,
};

/// Build the exact chain of a compressor law on `(d, m, K)`.
pub fn build_transition_matrix(
    law: ChainLaw,
    d: usize,
    m: usize,
    k: usize,
    options: ChainOptions,
) -> crate::Result<ChainModel> {
    ChainModel::build(law, d, m, k, options)
}
