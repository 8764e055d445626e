use crate::objective::Objective;
use crate::{Error, Result};

pub const DEFAULT_REFERENCE_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 2_000_000;

/// High-accuracy minimiser used to normalise suboptimality.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Full-gradient descent with Armijo backtracking from `x0` until `||grad f|| <= tol`.
///
/// Trial steps never grow. The sufficient-decrease test carries a slack of `4 eps |f|`.
pub fn reference_minimizer<O: Objective + ?Sized>(problem: &O, x0: Vec<f64>, tol: f64) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut x = x0;
    let (mut f, mut g) = problem.loss_grad(&x);
    let mut step = 1.0;
    for iterations in 0..MAX_ITERATIONS {
        let gn = norm_sq(&g);
        if !f.is_finite() || !gn.is_finite() {
            return Err(Error::Numerical("non-finite objective in reference solve".into()));
        }
        if gn.sqrt() <= tol {
            return Ok(Reference {
                x_star: x,
                f_star: f,
                grad_norm: gn.sqrt(),
                iterations,
            });
        }
        let slack = 4.0 * f64::EPSILON * f.abs();
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let (ft, gt) = problem.loss_grad(&trial);
            if ft <= f - 0.5 * step * gn + slack {
                x = trial;
                f = ft;
                g = gt;
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::NotConverged {
                    iterations,
                    grad_norm: gn.sqrt(),
                });
            }
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        grad_norm: norm_sq(&g).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::QuadraticProblem;

    #[test]
    fn quadratic_minimum() {
        let a = vec![1.0, -2.0, 0.5];
        let q = QuadraticProblem::isotropic(a.clone(), 2);
        let r = reference_minimizer(&q, vec![0.0; 3], 1e-10).unwrap();
        for (x, y) in r.x_star.iter().zip(&a) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let q = QuadraticProblem::new(vec![vec![100.0, 0.01]], vec![vec![1.0, 1.0]]).unwrap();
        let r = reference_minimizer(&q, vec![0.0; 2], 1e-10).unwrap();
        assert!(r.grad_norm <= 1e-10);
        let again = reference_minimizer(&q, r.x_star.clone(), 1e-10).unwrap();
        assert_eq!(again.iterations, 0);
        assert!(again.f_star - r.f_star <= 1e-14);
    }
}
