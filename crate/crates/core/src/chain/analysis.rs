use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;

use super::model::ChainModel;
use crate::compressors::ProbabilityVector;
use crate::error::ErgodicityFailure;
use crate::{Error, Result};

pub const STATIONARY_RESIDUAL: f64 = 1e-12;
pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;
/// Largest dense `|R| x |R|` block the deviation tracker will allocate.
const DENSE_ENTRY_CAP: u128 = 50_000_000;

/// Recurrent class of the warm-up closure after the ergodicity check.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentClass {
    /// Sorted state indices.
    pub states: Vec<usize>,
    /// Reachable states outside the class.
    pub transient: usize,
    /// Enumerated states never reached from the empty history.
    pub unreachable: usize,
}

/// Check that the reachable part of the chain has exactly one closed class and
/// that this class is aperiodic. Returns the class.
pub fn check_ergodic(chain: &ChainModel) -> Result<RecurrentClass> {
    let reachable = chain.reachable_states();
    let mut local = vec![usize::MAX; chain.num_states()];
    for (i, &s) in reachable.iter().enumerate() {
        local[s] = i;
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(reachable.len(), chain.targets.len());
    for _ in &reachable {
        graph.add_node(());
    }
    for (i, &s) in reachable.iter().enumerate() {
        for (t, _) in chain.row_iter(s) {
            graph.add_edge(NodeIndex::new(i), NodeIndex::new(local[t]), ());
        }
    }
    let components = tarjan_scc(&graph);
    let mut component_of = vec![0usize; reachable.len()];
    for (c, nodes) in components.iter().enumerate() {
        for n in nodes {
            component_of[n.index()] = c;
        }
    }
    let closed: Vec<usize> = (0..components.len())
        .filter(|&c| {
            components[c].iter().all(|n| {
                graph
                    .neighbors(*n)
                    .all(|m| component_of[m.index()] == c)
            })
        })
        .collect();
    if closed.len() != 1 {
        return Err(Error::NonErgodic(ErgodicityFailure::Reducible {
            classes: closed.len(),
        }));
    }
    let mut states: Vec<usize> = components[closed[0]]
        .iter()
        .map(|n| reachable[n.index()])
        .collect();
    states.sort_unstable();

    let period = period_of(chain, &states);
    if period != 1 {
        return Err(Error::NonErgodic(ErgodicityFailure::Periodic { period }));
    }
    Ok(RecurrentClass {
        transient: reachable.len() - states.len(),
        unreachable: chain.unreachable_count(),
        states,
    })
}

/// Period of a strongly connected class: gcd of `level(u) + 1 - level(v)` over its edges.
fn period_of(chain: &ChainModel, class: &[usize]) -> usize {
    let mut level = vec![usize::MAX; chain.num_states()];
    let mut queue = std::collections::VecDeque::new();
    level[class[0]] = 0;
    queue.push_back(class[0]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for (v, _) in chain.row_iter(u) {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug)]
pub struct StationaryDistribution {
    /// Distribution over all enumerated states; zero outside the recurrent class.
    pub pi: ProbabilityVector,
    pub class: RecurrentClass,
    pub iterations: usize,
    /// Final `||pi P - pi||_1`.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn min_positive(&self) -> f64 {
        self.class
            .states
            .iter()
            .map(|&s| self.pi[s])
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_s |pi_s - 1/|R||` over the recurrent class.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.class.states.len() as f64;
        self.class
            .states
            .iter()
            .map(|&s| (self.pi[s] - u).abs())
            .fold(0.0, f64::max)
    }
}

/// Power iteration from a point mass to residual `1e-12`.
pub fn stationary_distribution(chain: &ChainModel) -> Result<StationaryDistribution> {
    stationary_distribution_with(chain, STATIONARY_RESIDUAL, DEFAULT_ITERATION_CAP)
}

pub fn stationary_distribution_with(
    chain: &ChainModel,
    tolerance: f64,
    cap: usize,
) -> Result<StationaryDistribution> {
    let class = check_ergodic(chain)?;
    let n = chain.num_states();
    let mut pi = vec![0.0; n];
    pi[class.states[0]] = 1.0;
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    loop {
        next.iter_mut().for_each(|v| *v = 0.0);
        for &s in &class.states {
            let w = pi[s];
            if w == 0.0 {
                continue;
            }
            for (t, p) in chain.row_iter(s) {
                next[t] += w * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let residual: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
        if residual <= tolerance {
            return Ok(StationaryDistribution {
                pi: ProbabilityVector::new(pi)?,
                class,
                iterations,
                residual,
            });
        }
        if iterations >= cap {
            return Err(Error::NotMixed(iterations));
        }
    }
}

/// Sum of `pi` over states whose newest mask contains each coordinate.
pub fn newest_mask_marginal(chain: &ChainModel, stationary: &StationaryDistribution) -> Result<Vec<f64>> {
    if chain.history_len() == 0 {
        return Err(Error::invalid("a chain with K = 0 keeps no masks"));
    }
    let mut marginal = vec![0.0; chain.d()];
    for &s in &stationary.class.states {
        let newest = *chain.state(s).last().expect("K >= 1");
        for &j in newest.indices() {
            marginal[j] += stationary.pi[s];
        }
    }
    Ok(marginal)
}

/// Rows of `P^t` restricted to the recurrent class, advanced one step at a time.
pub struct DeviationTracker<'a> {
    chain: &'a ChainModel,
    class: Vec<usize>,
    local: Vec<usize>,
    target: Vec<f64>,
    rows: Vec<Vec<f64>>,
    t: usize,
}

impl<'a> DeviationTracker<'a> {
    pub fn new(chain: &'a ChainModel, stationary: &StationaryDistribution) -> Result<Self> {
        let class = stationary.class.states.clone();
        let r = class.len();
        let size = (r as u128) * (r as u128);
        if size > DENSE_ENTRY_CAP {
            return Err(Error::TooLarge {
                size,
                cap: DENSE_ENTRY_CAP,
            });
        }
        let mut local = vec![usize::MAX; chain.num_states()];
        for (i, &s) in class.iter().enumerate() {
            local[s] = i;
        }
        let target = class.iter().map(|&s| stationary.pi[s]).collect();
        let rows = (0..r)
            .map(|i| {
                let mut row = vec![0.0; r];
                row[i] = 1.0;
                row
            })
            .collect();
        Ok(DeviationTracker {
            chain,
            class,
            local,
            target,
            rows,
            t: 0,
        })
    }

    pub fn step(&self) -> usize {
        self.t
    }

    /// `max_{s0, s} |P^t(s0, s) - pi_s|` at the current `t`.
    pub fn deviation(&self) -> f64 {
        self.rows
            .par_iter()
            .map(|row| {
                row.iter()
                    .zip(&self.target)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn advance(&mut self) {
        let chain = self.chain;
        let class = &self.class;
        let local = &self.local;
        self.rows.par_iter_mut().for_each(|row| {
            let mut next = vec![0.0; row.len()];
            for (i, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (t, p) in chain.row_iter(class[i]) {
                    next[local[t]] += w * p;
                }
            }
            *row = next;
        });
        self.t += 1;
    }
}

/// Deviation `max_{s0} ||P^t(s0, .) - pi||_inf` for `t = 0..=t_max`.
pub fn deviation_curve(
    chain: &ChainModel,
    stationary: &StationaryDistribution,
    t_max: usize,
) -> Result<Vec<f64>> {
    let mut tracker = DeviationTracker::new(chain, stationary)?;
    let mut curve = Vec::with_capacity(t_max + 1);
    curve.push(tracker.deviation());
    for _ in 0..t_max {
        tracker.advance();
        curve.push(tracker.deviation());
    }
    Ok(curve)
}

/// Smallest `t` with `max_{s0, s} |P^t(s0, s) - pi_s| <= eps * min_s pi_s`.
pub fn mixing_time(chain: &ChainModel, eps: f64) -> Result<usize> {
    mixing_time_with(chain, eps, DEFAULT_ITERATION_CAP)
}

pub fn mixing_time_with(chain: &ChainModel, eps: f64, cap: usize) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("mixing accuracy must be positive, got {eps}")));
    }
    let stationary = stationary_distribution(chain)?;
    mixing_time_from(chain, &stationary, eps, cap)
}

pub fn mixing_time_from(
    chain: &ChainModel,
    stationary: &StationaryDistribution,
    eps: f64,
    cap: usize,
) -> Result<usize> {
    let threshold = eps * stationary.min_positive();
    let mut tracker = DeviationTracker::new(chain, stationary)?;
    loop {
        if tracker.deviation() <= threshold {
            return Ok(tracker.step());
        }
        if tracker.step() >= cap {
            return Err(Error::NotMixed(cap));
        }
        tracker.advance();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainLaw, ChainOptions};
    use crate::compressors::Activation;

    fn banlast(d: usize, m: usize, k: usize) -> ChainModel {
        ChainModel::build(ChainLaw::BanLast, d, m, k, ChainOptions::default()).unwrap()
    }

    fn kawasaki(d: usize, k: usize, b: f64) -> ChainModel {
        let law = ChainLaw::Kawasaki {
            b,
            activation: Activation::Normalize,
        };
        ChainModel::build(law, d, 1, k, ChainOptions::default()).unwrap()
    }

    #[test]
    fn banlast_three_is_uniform() {
        let st = stationary_distribution(&banlast(3, 1, 1)).unwrap();
        for s in 0..3 {
            assert!((st.pi[s] - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(st.residual <= STATIONARY_RESIDUAL);
    }

    #[test]
    fn banlast_pairs_uniform_on_reachable() {
        let chain = banlast(4, 1, 2);
        let st = stationary_distribution(&chain).unwrap();
        assert_eq!(st.class.states.len(), 12);
        assert_eq!(st.class.unreachable, 4);
        assert!(st.max_deviation_from_uniform() < 1e-10);
    }

    #[test]
    fn kawasaki_three_is_uniform() {
        let st = stationary_distribution(&kawasaki(3, 1, 5.0)).unwrap();
        assert!(st.max_deviation_from_uniform() < 1e-10);
    }

    #[test]
    fn boundary_alternation_is_periodic() {
        let chain = banlast(2, 1, 1);
        let err = stationary_distribution(&chain).unwrap_err();
        assert!(matches!(
            err,
            Error::NonErgodic(ErgodicityFailure::Periodic { period: 2 })
        ));
        assert!(matches!(mixing_time(&chain, 0.1), Err(Error::NonErgodic(_))));
    }

    #[test]
    fn uniform_rows_mix_in_one_step() {
        let chain = ChainModel::build(ChainLaw::RandM, 5, 1, 1, ChainOptions::default()).unwrap();
        for eps in [1e-6, 0.01, 0.5] {
            assert_eq!(mixing_time(&chain, eps).unwrap(), 1);
        }
    }

    #[test]
    fn mixing_time_is_first_crossing() {
        let chain = banlast(4, 1, 1);
        let eps = 0.01;
        let tau = mixing_time(&chain, eps).unwrap();
        let st = stationary_distribution(&chain).unwrap();
        let curve = deviation_curve(&chain, &st, tau).unwrap();
        let threshold = eps * st.min_positive();
        assert!(curve[tau] <= threshold);
        assert!(curve[tau - 1] > threshold);
        // Deviation from a vertex is (3/4)(1/3)^t for this chain.
        for (t, dev) in curve.iter().enumerate() {
            assert!((dev - 0.75 * (1.0f64 / 3.0).powi(t as i32)).abs() < 1e-12, "t={t} dev={dev}");
        }
    }

    #[test]
    fn mixing_time_monotone_in_eps() {
        let chain = kawasaki(4, 1, 5.0);
        let taus: Vec<usize> = [1e-4, 1e-3, 1e-2, 0.1, 0.5]
            .iter()
            .map(|&e| mixing_time(&chain, e).unwrap())
            .collect();
        assert!(taus.windows(2).all(|w| w[0] >= w[1]), "{taus:?}");
    }

    #[test]
    fn newest_marginal_is_m_over_d() {
        let chain = ChainModel::build(ChainLaw::BanLast, 5, 2, 1, ChainOptions::default()).unwrap();
        let st = stationary_distribution(&chain).unwrap();
        for v in newest_mask_marginal(&chain, &st).unwrap() {
            assert!((v - 0.4).abs() < 1e-10);
        }
    }
}
