use std::collections::VecDeque;

use crate::{Error, Result};

/// A set of `m` distinct coordinates out of `0..dim`, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoordinateMask {
    indices: Vec<usize>,
    dim: usize,
}

impl CoordinateMask {
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::invalid(format!(
                    "mask index {last} out of range for dimension {dim}"
                )));
            }
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("mask contains duplicate indices"));
        }
        Ok(CoordinateMask { indices, dim })
    }

    /// Every coordinate of `0..dim`.
    pub fn full(dim: usize) -> Self {
        CoordinateMask {
            indices: (0..dim).collect(),
            dim,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn is_disjoint(&self, other: &CoordinateMask) -> bool {
        let (mut a, mut b) = (self.indices.iter().peekable(), other.indices.iter().peekable());
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    /// Apply a coordinate permutation: coordinate `j` becomes `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut indices: Vec<usize> = self.indices.iter().map(|&j| perm[j]).collect();
        indices.sort_unstable();
        CoordinateMask {
            indices,
            dim: self.dim,
        }
    }
}

/// The last `capacity` masks, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct History {
    capacity: usize,
    entries: VecDeque<CoordinateMask>,
}

impl History {
    pub fn new(capacity: usize) -> Self {
        History {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    /// Build a history from masks listed oldest first. Keeps only the newest `capacity`.
    pub fn from_masks(capacity: usize, masks: impl IntoIterator<Item = CoordinateMask>) -> Self {
        let mut history = History::new(capacity);
        for mask in masks {
            history.push(mask);
        }
        history
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Append the newest mask, evicting the oldest when full. No-op for capacity 0.
    pub fn push(&mut self, mask: CoordinateMask) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(mask);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &CoordinateMask> {
        self.entries.iter()
    }

    pub fn newest(&self) -> Option<&CoordinateMask> {
        self.entries.back()
    }

    /// How many stored masks contain each coordinate.
    pub fn counts(&self, dim: usize) -> Vec<u32> {
        let mut counts = vec![0u32; dim];
        for mask in &self.entries {
            for &j in mask.indices() {
                counts[j] += 1;
            }
        }
        counts
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        History {
            capacity: self.capacity,
            entries: self.entries.iter().map(|m| m.permuted(perm)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(ix: &[usize], d: usize) -> CoordinateMask {
        CoordinateMask::new(ix.to_vec(), d).unwrap()
    }

    #[test]
    fn mask_validation() {
        assert!(CoordinateMask::new(vec![0, 4], 4).is_err());
        assert!(CoordinateMask::new(vec![1, 1], 4).is_err());
        let m = mask(&[3, 0], 4);
        assert_eq!(m.indices(), &[0, 3]);
        assert!(m.contains(3) && !m.contains(1));
    }

    #[test]
    fn disjointness() {
        assert!(mask(&[0, 2], 5).is_disjoint(&mask(&[1, 3], 5)));
        assert!(!mask(&[0, 2], 5).is_disjoint(&mask(&[2, 4], 5)));
    }

    #[test]
    fn history_evicts_oldest() {
        let mut h = History::new(2);
        h.push(mask(&[0], 3));
        h.push(mask(&[1], 3));
        h.push(mask(&[2], 3));
        assert_eq!(h.len(), 2);
        let got: Vec<_> = h.iter().map(|m| m.indices()[0]).collect();
        assert_eq!(got, vec![1, 2]);
        assert_eq!(h.counts(3), vec![0, 1, 1]);
    }

    #[test]
    fn zero_capacity_history_stays_empty() {
        let mut h = History::new(0);
        h.push(mask(&[0], 3));
        assert!(h.is_empty());
        assert!(h.is_full());
    }
}
