use std::collections::VecDeque;
use std::fmt;

use crate::compressors::{
    banlast_probabilities, kawasaki_probabilities, subset_probability, Activation, CoordinateMask,
    History, ProbabilityVector,
};
use crate::{Error, Result};

/// Default bound on the number of enumerated states.
pub const DEFAULT_STATE_CAP: u128 = 200_000;

/// Selection law whose chain is being analysed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChainLaw {
    RandM,
    BanLast,
    Kawasaki { b: f64, activation: Activation },
}

impl ChainLaw {
    /// The same probability routine the live compressor uses.
    pub fn probabilities(&self, history: &History, d: usize, m: usize) -> Result<ProbabilityVector> {
        match *self {
            ChainLaw::RandM => Ok(ProbabilityVector::uniform(d)),
            ChainLaw::BanLast => banlast_probabilities(history, d, m),
            ChainLaw::Kawasaki { b, activation } => {
                kawasaki_probabilities(history, d, m, b, activation)
            }
        }
    }

    pub fn forgetting_rate(&self) -> Option<f64> {
        match self {
            ChainLaw::Kawasaki { b, .. } => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for ChainLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainLaw::RandM => f.write_str("rand"),
            ChainLaw::BanLast => f.write_str("banlast"),
            ChainLaw::Kawasaki { b, activation } => write!(f, "kawasaki(b={b}, {activation})"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ChainOptions {
    pub state_cap: u128,
    /// Permit KAWASAKI with m > 1, where the joint law of the m draws is the
    /// sequential-sampling choice rather than something fixed by the weights.
    pub allow_sequential_joint_law: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            state_cap: DEFAULT_STATE_CAP,
            allow_sequential_joint_law: false,
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// All `m`-subsets of `0..d` in lexicographic order.
pub fn enumerate_masks(d: usize, m: usize) -> Vec<CoordinateMask> {
    let mut out = Vec::new();
    if m > d {
        return out;
    }
    let mut current: Vec<usize> = (0..m).collect();
    loop {
        out.push(CoordinateMask::new(current.clone(), d).expect("valid combination"));
        // Advance to the next combination.
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] < d - m + i {
                current[i] += 1;
                for j in i + 1..m {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Number of K-tuples of m-subsets, or `TooLarge` past `cap`.
pub fn state_count(d: usize, m: usize, k: usize, cap: u128) -> Result<u128> {
    let masks = binomial(d, m).ok_or(Error::TooLarge {
        size: u128::MAX,
        cap,
    })?;
    let mut size: u128 = 1;
    for _ in 0..k {
        size = size.checked_mul(masks).ok_or(Error::TooLarge {
            size: u128::MAX,
            cap,
        })?;
    }
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    Ok(size)
}

/// Every state (a K-tuple of masks, oldest first) in lexicographic order.
pub fn enumerate_states(d: usize, m: usize, k: usize, cap: u128) -> Result<Vec<Vec<CoordinateMask>>> {
    let total = state_count(d, m, k, cap)? as usize;
    let masks = enumerate_masks(d, m);
    let codec = StateCodec::new(masks.len(), k);
    Ok((0..total)
        .map(|s| codec.decode(s).into_iter().map(|i| masks[i].clone()).collect())
        .collect())
}

/// Mixed-radix encoding of mask-index tuples; the first (oldest) entry is most significant.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StateCodec {
    radix: usize,
    k: usize,
    /// radix^(k-1): the weight of the oldest slot.
    top: usize,
}

impl StateCodec {
    pub(crate) fn new(radix: usize, k: usize) -> Self {
        let top = if k == 0 { 1 } else { radix.pow(k as u32 - 1) };
        StateCodec { radix, k, top }
    }

    pub(crate) fn decode(&self, mut s: usize) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for slot in out.iter_mut().rev() {
            *slot = s % self.radix;
            s /= self.radix;
        }
        out
    }

    pub(crate) fn encode(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &i| acc * self.radix + i)
    }

    /// State after appending mask `next` and dropping the oldest.
    pub(crate) fn successor(&self, s: usize, next: usize) -> usize {
        if self.k == 0 {
            0
        } else {
            (s % self.top) * self.radix + next
        }
    }
}

/// Exact chain over K-tuples of masks with a sparse row-stochastic transition matrix.
#[derive(Clone, Debug)]
pub struct ChainModel {
    pub(crate) d: usize,
    pub(crate) m: usize,
    pub(crate) k: usize,
    pub(crate) law: ChainLaw,
    pub(crate) masks: Vec<CoordinateMask>,
    pub(crate) codec: StateCodec,
    /// CSR layout: row `s` occupies `offsets[s]..offsets[s + 1]`.
    pub(crate) offsets: Vec<usize>,
    pub(crate) targets: Vec<u32>,
    pub(crate) probs: Vec<f64>,
    /// States reached from the empty history after warm-up, and everything they lead to.
    pub(crate) reachable: Vec<bool>,
}

impl ChainModel {
    pub fn build(law: ChainLaw, d: usize, m: usize, k: usize, options: ChainOptions) -> Result<Self> {
        if m == 0 || m > d {
            return Err(Error::invalid(format!("need 1 <= m <= d, got m = {m}, d = {d}")));
        }
        if let ChainLaw::Kawasaki { b, .. } = law {
            if !(b > 1.0) {
                return Err(Error::invalid(format!("forgetting rate must exceed 1, got {b}")));
            }
            if m > 1 && !options.allow_sequential_joint_law {
                return Err(Error::invalid(
                    "KAWASAKI chains with m > 1 depend on the joint sampling law; \
                     enable allow_sequential_joint_law to use sequential draws",
                ));
            }
        }
        if law == ChainLaw::BanLast && d < (k + 1) * m {
            return Err(Error::InfeasibleBanSet {
                available: d.saturating_sub(k * m),
                needed: m,
            });
        }
        let total = state_count(d, m, k, options.state_cap)? as usize;
        let masks = enumerate_masks(d, m);
        let codec = StateCodec::new(masks.len(), k);

        let mut offsets = Vec::with_capacity(total + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for s in 0..total {
            let history = History::from_masks(k, codec.decode(s).into_iter().map(|i| masks[i].clone()));
            let p = law.probabilities(&history, d, m)?;
            for (j, mask) in masks.iter().enumerate() {
                let q = subset_probability(&p, mask);
                if q > 0.0 {
                    targets.push(codec.successor(s, j) as u32);
                    probs.push(q);
                }
            }
            offsets.push(targets.len());
        }

        let mut model = ChainModel {
            d,
            m,
            k,
            law,
            masks,
            codec,
            offsets,
            targets,
            probs,
            reachable: Vec::new(),
        };
        model.reachable = model.warm_up_closure()?;
        Ok(model)
    }

    /// Forward closure of the full histories produced by warm-up from the empty history.
    fn warm_up_closure(&self) -> Result<Vec<bool>> {
        let total = self.num_states();
        let mut reachable = vec![false; total];
        let mut queue = VecDeque::new();
        if self.k == 0 {
            reachable[0] = true;
            return Ok(reachable);
        }
        // Partial histories, grown one mask at a time with the warm-up law.
        let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..self.k {
            let mut next_layer = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for partial in &layer {
                let history = History::from_masks(
                    self.k,
                    partial.iter().map(|&i| self.masks[i].clone()),
                );
                let p = self.law.probabilities(&history, self.d, self.m)?;
                for (j, mask) in self.masks.iter().enumerate() {
                    if subset_probability(&p, mask) > 0.0 {
                        let mut grown = partial.clone();
                        grown.push(j);
                        if seen.insert(grown.clone()) {
                            next_layer.push(grown);
                        }
                    }
                }
            }
            layer = next_layer;
        }
        for tuple in layer {
            let s = self.codec.encode(&tuple);
            if !reachable[s] {
                reachable[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &(t, _) in self.row(s).iter() {
                if !reachable[t] {
                    reachable[t] = true;
                    queue.push_back(t);
                }
            }
        }
        Ok(reachable)
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn history_len(&self) -> usize {
        self.k
    }

    pub fn law(&self) -> ChainLaw {
        self.law
    }

    /// Masks of state `s`, oldest first.
    pub fn state(&self, s: usize) -> Vec<&CoordinateMask> {
        self.codec.decode(s).into_iter().map(|i| &self.masks[i]).collect()
    }

    /// Index of the state whose masks (oldest first) are `masks`.
    pub fn index_of(&self, masks: &[CoordinateMask]) -> Option<usize> {
        if masks.len() != self.k {
            return None;
        }
        let tuple: Option<Vec<usize>> = masks
            .iter()
            .map(|m| self.masks.binary_search(m).ok())
            .collect();
        tuple.map(|t| self.codec.encode(&t))
    }

    /// Non-zero entries `(target, probability)` of row `s`.
    pub fn row(&self, s: usize) -> Vec<(usize, f64)> {
        let range = self.offsets[s]..self.offsets[s + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.probs[range])
            .map(|(&t, &p)| (t as usize, p))
            .collect()
    }

    pub(crate) fn row_iter(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[s]..self.offsets[s + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.probs[range])
            .map(|(&t, &p)| (t as usize, p))
    }

    pub fn probability(&self, from: usize, to: usize) -> f64 {
        self.row_iter(from)
            .find(|(t, _)| *t == to)
            .map_or(0.0, |(_, p)| p)
    }

    /// Dense copy of the transition matrix. Intended for small chains.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_states();
        let mut dense = vec![vec![0.0; n]; n];
        for (s, row) in dense.iter_mut().enumerate() {
            for (t, p) in self.row_iter(s) {
                row[t] += p;
            }
        }
        dense
    }

    pub fn is_reachable(&self, s: usize) -> bool {
        self.reachable[s]
    }

    pub fn reachable_states(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&s| self.reachable[s]).collect()
    }

    pub fn unreachable_count(&self) -> usize {
        self.reachable.iter().filter(|r| !**r).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_counts() {
        let cap = DEFAULT_STATE_CAP;
        assert_eq!(enumerate_states(3, 1, 1, cap).unwrap().len(), 3);
        assert_eq!(enumerate_states(4, 2, 1, cap).unwrap().len(), 6);
        assert_eq!(enumerate_states(4, 1, 2, cap).unwrap().len(), 16);
        assert!(matches!(
            enumerate_states(20, 2, 4, cap),
            Err(Error::TooLarge { size, .. }) if size == 190u128.pow(4)
        ));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let states = enumerate_states(3, 1, 2, DEFAULT_STATE_CAP).unwrap();
        let flat: Vec<(usize, usize)> = states
            .iter()
            .map(|s| (s[0].indices()[0], s[1].indices()[0]))
            .collect();
        let mut sorted = flat.clone();
        sorted.sort();
        assert_eq!(flat, sorted);
        let masks = enumerate_masks(5, 2);
        assert_eq!(masks.len(), 10);
        assert!(masks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn codec_roundtrip() {
        let codec = StateCodec::new(5, 3);
        for s in 0..125 {
            assert_eq!(codec.encode(&codec.decode(s)), s);
        }
        let s = codec.encode(&[1, 2, 3]);
        assert_eq!(codec.decode(codec.successor(s, 4)), vec![2, 3, 4]);
    }

    #[test]
    fn banlast_small_matrices() {
        let chain = ChainModel::build(ChainLaw::BanLast, 3, 1, 1, ChainOptions::default()).unwrap();
        let p = chain.to_dense();
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 0.0 } else { 0.5 };
                assert!((v - want).abs() < 1e-15);
            }
        }
        let chain = ChainModel::build(ChainLaw::BanLast, 4, 1, 1, ChainOptions::default()).unwrap();
        for (i, row) in chain.to_dense().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 0.0 } else { 1.0 / 3.0 };
                assert!((v - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kawasaki_row_matches_probability_routine() {
        let law = ChainLaw::Kawasaki {
            b: 2.0,
            activation: Activation::Normalize,
        };
        let chain = ChainModel::build(law, 3, 1, 1, ChainOptions::default()).unwrap();
        let row = &chain.to_dense()[0];
        for (v, want) in row.iter().zip([0.2, 0.4, 0.4]) {
            assert!((v - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let laws = [
            ChainLaw::RandM,
            ChainLaw::BanLast,
            ChainLaw::Kawasaki {
                b: 3.0,
                activation: Activation::Softmax,
            },
        ];
        let options = ChainOptions {
            allow_sequential_joint_law: true,
            ..Default::default()
        };
        for law in laws {
            let chain = ChainModel::build(law, 6, 2, 1, options).unwrap();
            for s in 0..chain.num_states() {
                let sum: f64 = chain.row(s).iter().map(|(_, p)| p).sum();
                assert!((sum - 1.0).abs() < 1e-12, "{law}: row {s} sums to {sum}");
                assert!(chain.row(s).iter().all(|(_, p)| *p >= 0.0));
            }
        }
    }

    #[test]
    fn kawasaki_multi_draw_needs_opt_in() {
        let law = ChainLaw::Kawasaki {
            b: 2.0,
            activation: Activation::Normalize,
        };
        assert!(ChainModel::build(law, 4, 2, 1, ChainOptions::default()).is_err());
    }

    #[test]
    fn banlast_repeated_masks_are_unreachable() {
        let chain = ChainModel::build(ChainLaw::BanLast, 4, 1, 2, ChainOptions::default()).unwrap();
        // Ordered pairs (a, a) are never produced.
        assert_eq!(chain.unreachable_count(), 4);
        let m = |j| CoordinateMask::new(vec![j], 4).unwrap();
        assert!(!chain.is_reachable(chain.index_of(&[m(1), m(1)]).unwrap()));
        assert!(chain.is_reachable(chain.index_of(&[m(1), m(2)]).unwrap()));
    }
}
