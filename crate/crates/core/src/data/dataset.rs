use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// Sparse binary-classification data in CSR layout with 0-based feature indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    labels: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Dataset {
    pub fn from_csr(
        dim: usize,
        labels: Vec<f64>,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != labels.len() + 1 || row_ptr[0] != 0 {
            return Err(Error::invalid("row pointer does not match the label count"));
        }
        if *row_ptr.last().unwrap() != cols.len() || cols.len() != vals.len() {
            return Err(Error::invalid("row pointer does not match the entry count"));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid("labels must be -1 or +1"));
        }
        for r in row_ptr.windows(2) {
            let row = &cols[r[0]..r[1]];
            if r[0] > r[1] || row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("row indices must be strictly increasing"));
            }
            if row.last().is_some_and(|&c| c >= dim) {
                return Err(Error::invalid(format!("feature index exceeds dimension {dim}")));
            }
        }
        Ok(Dataset {
            dim,
            labels,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Build from dense rows; zeros are dropped.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(Error::invalid("dense rows differ in length"));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self::from_csr(dim, labels, row_ptr, cols, vals)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let (c, v) = self.row(i);
        for (&j, &x) in c.iter().zip(v) {
            out[j] = x;
        }
        out
    }

    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&j, &x)| x * w[j]).sum()
    }

    /// `out += a * x_i`.
    pub fn add_row(&self, i: usize, a: f64, out: &mut [f64]) {
        let (c, v) = self.row(i);
        for (&j, &x) in c.iter().zip(v) {
            out[j] += a * x;
        }
    }

    /// Same rows under a (possibly larger) dimension.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if self.cols.iter().any(|&c| c >= dim) {
            return Err(Error::invalid(format!("feature index exceeds dimension {dim}")));
        }
        self.dim = dim;
        Ok(self)
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut row_ptr = Vec::with_capacity(indices.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (c, v) = self.row(i);
            cols.extend_from_slice(c);
            vals.extend_from_slice(v);
            labels.push(self.labels[i]);
            row_ptr.push(cols.len());
        }
        Dataset {
            dim: self.dim,
            labels,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Concatenate datasets of equal dimension.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let dim = parts.first().map_or(0, |p| p.dim);
        if parts.iter().any(|p| p.dim != dim) {
            return Err(Error::invalid("datasets differ in dimension"));
        }
        let mut out = Dataset {
            dim,
            labels: Vec::new(),
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        };
        for p in parts {
            let base = out.cols.len();
            out.labels.extend_from_slice(&p.labels);
            out.cols.extend_from_slice(&p.cols);
            out.vals.extend_from_slice(&p.vals);
            out.row_ptr.extend(p.row_ptr[1..].iter().map(|r| r + base));
        }
        Ok(out)
    }
}

/// Shuffle rows, then cut into `n` contiguous shards whose sizes differ by at most one.
pub fn partition<R: Rng + ?Sized>(dataset: &Dataset, n: usize, rng: &mut R) -> Result<Vec<Dataset>> {
    if n == 0 {
        return Err(Error::invalid("need at least one shard"));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("cannot partition an empty dataset"));
    }
    if n > dataset.len() {
        return Err(Error::invalid(format!(
            "{n} shards requested for {} rows",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    let base = dataset.len() / n;
    let extra = dataset.len() % n;
    let mut shards = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let size = base + usize::from(i < extra);
        shards.push(dataset.select(&order[start..start + size]));
        start += size;
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn toy(rows: usize) -> Dataset {
        let dense: Vec<Vec<f64>> = (0..rows).map(|i| vec![i as f64, 1.0]).collect();
        let labels = (0..rows).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Dataset::from_dense(&dense, labels).unwrap()
    }

    #[test]
    fn equal_shards() {
        let shards = partition(&toy(10), 5, &mut rng::seeded(1)).unwrap();
        assert!(shards.iter().all(|s| s.len() == 2));
        let sizes: Vec<usize> = partition(&toy(11), 3, &mut rng::seeded(1))
            .unwrap()
            .iter()
            .map(Dataset::len)
            .collect();
        assert_eq!(sizes, vec![4, 4, 3]);
    }

    #[test]
    fn single_shard_is_a_permutation() {
        let data = toy(7);
        let shard = &partition(&data, 1, &mut rng::seeded(2)).unwrap()[0];
        let mut firsts: Vec<f64> = (0..7).map(|i| shard.dense_row(i)[0]).collect();
        firsts.sort_by(f64::total_cmp);
        assert_eq!(firsts, (0..7).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn partition_is_deterministic() {
        let data = toy(30);
        let a = partition(&data, 4, &mut rng::seeded(5)).unwrap();
        let b = partition(&data, 4, &mut rng::seeded(5)).unwrap();
        assert_eq!(a, b);
        assert!(partition(&data, 31, &mut rng::seeded(5)).is_err());
    }

    #[test]
    fn concat_inverts_partition_up_to_order() {
        let data = toy(9);
        let shards = partition(&data, 3, &mut rng::seeded(8)).unwrap();
        let joined = Dataset::concat(&shards).unwrap();
        assert_eq!(joined.len(), 9);
        assert_eq!(joined.nnz(), data.nnz());
    }
}
