//! Finite-sum objectives `f(x) = (1/n) sum_i f_i(x)` split across workers.

use crate::{Error, Result};

pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn workers(&self) -> usize;

    /// Value and gradient of worker `i`'s local function.
    fn local_loss_grad(&self, i: usize, w: &[f64]) -> (f64, Vec<f64>);

    /// Value and gradient of the average, summed in worker order.
    fn loss_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let n = self.workers();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for i in 0..n {
            let (l, g) = self.local_loss_grad(i, w);
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let inv = 1.0 / n as f64;
        grad.iter_mut().for_each(|v| *v *= inv);
        (loss * inv, grad)
    }

    fn loss(&self, w: &[f64]) -> f64 {
        self.loss_grad(w).0
    }
}

/// Separable quadratics `f_i(x) = 1/2 sum_j a_ij (x_j - c_ij)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProblem {
    curvature: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

impl QuadraticProblem {
    pub fn new(curvature: Vec<Vec<f64>>, centers: Vec<Vec<f64>>) -> Result<Self> {
        if curvature.is_empty() || curvature.len() != centers.len() {
            return Err(Error::invalid("need one curvature and one center per worker"));
        }
        let d = curvature[0].len();
        if curvature.iter().chain(&centers).any(|v| v.len() != d) {
            return Err(Error::invalid("all curvature and center vectors must share a length"));
        }
        if curvature.iter().flatten().any(|a| !(*a >= 0.0)) {
            return Err(Error::invalid("curvatures must be non-negative"));
        }
        Ok(QuadraticProblem { curvature, centers })
    }

    /// `1/2 ||x - a||^2` on every one of `n` workers.
    pub fn isotropic(center: Vec<f64>, n: usize) -> Self {
        let d = center.len();
        QuadraticProblem {
            curvature: vec![vec![1.0; d]; n],
            centers: vec![center; n],
        }
    }

    /// Exact minimiser of the average.
    pub fn minimizer(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|j| {
                let a: f64 = self.curvature.iter().map(|c| c[j]).sum();
                let ac: f64 = self
                    .curvature
                    .iter()
                    .zip(&self.centers)
                    .map(|(c, x)| c[j] * x[j])
                    .sum();
                if a > 0.0 {
                    ac / a
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn smoothness(&self) -> f64 {
        self.curvature.iter().flatten().copied().fold(0.0, f64::max)
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.curvature[0].len()
    }

    fn workers(&self) -> usize {
        self.curvature.len()
    }

    fn local_loss_grad(&self, i: usize, w: &[f64]) -> (f64, Vec<f64>) {
        let mut loss = 0.0;
        let grad = w
            .iter()
            .zip(&self.curvature[i])
            .zip(&self.centers[i])
            .map(|((x, a), c)| {
                let r = x - c;
                loss += 0.5 * a * r * r;
                a * r
            })
            .collect();
        (loss, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_of_quadratics() {
        let q = QuadraticProblem::new(
            vec![vec![1.0, 2.0], vec![3.0, 2.0]],
            vec![vec![0.0, 1.0], vec![4.0, -1.0]],
        )
        .unwrap();
        let x = q.minimizer();
        assert_eq!(x, vec![3.0, 0.0]);
        let (_, g) = q.loss_grad(&x);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(q.smoothness(), 3.0);
    }
}
