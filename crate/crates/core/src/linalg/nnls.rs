use crate::error::{precondition, Error, Result};
use crate::scalar::Scalar;

use super::decomp::least_squares;
use super::matrix::{norm2, DenseMatrix};

/// Solution of `min_{x ≥ 0} ‖A x − b‖₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct NnlsResult<T> {
    pub weights: Vec<T>,
    pub residual_norm: T,
    pub iterations: usize,
}

/// Lawson-Hanson active-set non-negative least squares.
///
/// Each outer iteration frees the constrained variable with the largest positive dual
/// component `w = Aᵀ(b − Ax)`; the inner loop backtracks along the segment to the
/// unconstrained passive-set solution until it is feasible. The number of outer
/// iterations is capped at `3·cols`; on overrun the best feasible iterate is returned
/// inside [`Error::NnlsNotConverged`].
pub fn nnls<T: Scalar>(system: &DenseMatrix<T>, rhs: &[T]) -> Result<NnlsResult<T>> {
    let (m, n) = system.shape();
    precondition(m == rhs.len(), || {
        format!("nnls: system has {m} rows but rhs has length {}", rhs.len())
    })?;
    system.ensure_finite("nnls system")?;
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("nnls rhs contains non-finite entries".into()));
    }

    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let max_iter = 3 * n;
    let tol = T::epsilon() * T::of(1e3) * (T::one() + system.frobenius_norm() * norm2(rhs));
    let mut iterations = 0;

    loop {
        let resid = residual(system, &x, rhs);
        let w = system.tr_matvec(&resid);

        // candidates ordered by dual value; ones whose trial value is non-positive are skipped
        let mut candidates: Vec<usize> = (0..n).filter(|&j| !passive[j] && w[j] > tol).collect();
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(a.cmp(&b)));

        iterations += 1;
        if iterations > max_iter {
            return Err(not_converged(system, &x, rhs, iterations - 1));
        }

        let mut entered = None;
        for &j in &candidates {
            passive[j] = true;
            let trial = passive_solution(system, rhs, &passive)?;
            if trial[j] > T::zero() {
                entered = Some(trial);
                break;
            }
            passive[j] = false;
        }
        let Some(mut z) = entered else { break };

        // inner loop: restore feasibility
        for _ in 0..=n {
            if (0..n).all(|j| !passive[j] || z[j] > T::zero()) {
                break;
            }
            let mut alpha = T::one();
            for j in 0..n {
                if passive[j] && z[j] <= T::zero() {
                    let a = x[j] / (x[j] - z[j]);
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            let xmax = x.iter().fold(T::zero(), |a, v| a.max(v.abs()));
            let drop_tol = T::epsilon() * T::of(10.0) * xmax.max(T::one());
            for j in 0..n {
                if passive[j] {
                    let xj = x[j];
                    x[j] = xj + alpha * (z[j] - xj);
                    if x[j] <= drop_tol {
                        x[j] = T::zero();
                        passive[j] = false;
                    }
                }
            }
            z = passive_solution(system, rhs, &passive)?;
        }
        for j in 0..n {
            x[j] = if passive[j] { z[j].max(T::zero()) } else { T::zero() };
        }
    }

    let residual_norm = norm2(&residual(system, &x, rhs));
    Ok(NnlsResult {
        weights: x,
        residual_norm,
        iterations,
    })
}

fn residual<T: Scalar>(a: &DenseMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    let ax = a.matvec(x);
    b.iter().zip(ax).map(|(&bi, ai)| bi - ai).collect()
}

/// Unconstrained least-squares solution over the passive columns, zero elsewhere.
fn passive_solution<T: Scalar>(a: &DenseMatrix<T>, b: &[T], passive: &[bool]) -> Result<Vec<T>> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = a.select_cols(&idx);
    let sol = least_squares(&sub, b)?;
    let mut z = vec![T::zero(); passive.len()];
    for (k, &j) in idx.iter().enumerate() {
        z[j] = sol[k];
    }
    Ok(z)
}

fn not_converged<T: Scalar>(a: &DenseMatrix<T>, x: &[T], b: &[T], iterations: usize) -> Error {
    let weights: Vec<f64> = x.iter().map(|v| v.max(T::zero()).to_f64_lossy()).collect();
    Error::NnlsNotConverged {
        iterations,
        weights,
        residual_norm: norm2(&residual(a, x, b)).to_f64_lossy(),
    }
}
