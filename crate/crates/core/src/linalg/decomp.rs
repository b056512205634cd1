use crate::error::{precondition, Result};
use crate::scalar::Scalar;

use super::matrix::{dot, norm2, DenseMatrix};

const MAX_JACOBI_SWEEPS: usize = 80;

/// Thin QR factorisation `A = Q R` with `Q` (m×k) orthonormal and `R` (k×n) upper
/// triangular, `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct ThinQr<T> {
    pub q: DenseMatrix<T>,
    pub r: DenseMatrix<T>,
}

/// Householder QR.
pub fn householder_qr<T: Scalar>(a: &DenseMatrix<T>) -> ThinQr<T> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut work = a.clone();
    let mut reflectors: Vec<(Vec<T>, T)> = Vec::with_capacity(k);

    for j in 0..k {
        let x: Vec<T> = work.col(j)[j..].to_vec();
        let alpha = norm2(&x);
        if alpha == T::zero() {
            reflectors.push((vec![T::zero(); m - j], T::zero()));
            continue;
        }
        // v = x + sign(x0) ‖x‖ e1, H = I - beta v vᵀ
        let sign = if x[0] >= T::zero() { T::one() } else { -T::one() };
        let mut v = x;
        v[0] += sign * alpha;
        let vnorm2 = dot(&v, &v);
        let beta = T::of(2.0) / vnorm2;
        for c in j..n {
            let col = &mut work.col_mut(c)[j..];
            let s = beta * dot(&v, col);
            for (ci, &vi) in col.iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
        // exact zeros below the diagonal
        for i in j + 1..m {
            work[(i, j)] = T::zero();
        }
        reflectors.push((v, beta));
    }

    let mut q = DenseMatrix::zeros(m, k);
    for i in 0..k {
        q[(i, i)] = T::one();
    }
    for j in (0..k).rev() {
        let (v, beta) = &reflectors[j];
        if *beta == T::zero() {
            continue;
        }
        for c in 0..k {
            let col = &mut q.col_mut(c)[j..];
            let s = *beta * dot(v, col);
            for (ci, &vi) in col.iter_mut().zip(v) {
                *ci -= s * vi;
            }
        }
    }
    let r = DenseMatrix::from_fn(k, n, |i, jj| if i <= jj { work[(i, jj)] } else { T::zero() });
    ThinQr { q, r }
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
#[derive(Clone, Debug)]
pub struct ThinSvdResult<T> {
    pub u: DenseMatrix<T>,
    pub singular_values: Vec<T>,
    pub vt: DenseMatrix<T>,
}

impl<T: Scalar> ThinSvdResult<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            for v in us.col_mut(j) {
                *v *= s;
            }
        }
        us.matmul(&self.vt)
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(mut self, k: usize) -> Self {
        let k = k.min(self.singular_values.len());
        self.u = self.u.col_range(0..k);
        self.singular_values.truncate(k);
        let rows: Vec<usize> = (0..k).collect();
        self.vt = self.vt.select_rows(&rows);
        self
    }
}

/// Thin SVD by QR preconditioning followed by one-sided (Hestenes) Jacobi on `R`.
///
/// Returns `k = min(m, n)` triplets with singular values sorted non-increasing. Columns of
/// `U` attached to zero singular values are completed to an orthonormal set.
pub fn thin_svd<T: Scalar>(a: &DenseMatrix<T>) -> Result<ThinSvdResult<T>> {
    a.ensure_finite("svd input")?;
    let (m, n) = a.shape();
    if m < n {
        let t = thin_svd(&a.transpose())?;
        return Ok(ThinSvdResult {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        });
    }
    if n == 0 {
        return Ok(ThinSvdResult {
            u: DenseMatrix::zeros(m, 0),
            singular_values: vec![],
            vt: DenseMatrix::zeros(0, 0),
        });
    }

    let ThinQr { q, r } = householder_qr(a);
    let mut w = r; // n×n, columns rotated in place
    let mut v = DenseMatrix::<T>::identity(n);
    let eps = T::epsilon();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for qq in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(qq), w.col(qq));
                let gamma = dot(w.col(p), w.col(qq));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, p, qq, c, s);
                rotate_columns(&mut v, p, qq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<T> = (0..n).map(|j| norm2(w.col(j))).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));

    let smax = sigma[order[0]];
    let tiny = smax * eps * T::of(n as f64);
    let mut u_small = DenseMatrix::<T>::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut needs_completion = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = sigma[j];
        singular_values.push(s);
        if s > tiny && s > T::zero() {
            for (dst, &src) in u_small.col_mut(k).iter_mut().zip(w.col(j)) {
                *dst = src / s;
            }
        } else {
            needs_completion.push(k);
        }
    }
    complete_orthonormal(&mut u_small, &needs_completion);

    let vt = DenseMatrix::from_fn(n, n, |i, jj| v[(jj, order[i])]);
    Ok(ThinSvdResult {
        u: q.matmul(&u_small),
        singular_values,
        vt,
    })
}

fn rotate_columns<T: Scalar>(m: &mut DenseMatrix<T>, p: usize, q: usize, c: T, s: T) {
    let rows = m.rows();
    for i in 0..rows {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = c * a - s * b;
        m[(i, q)] = s * a + c * b;
    }
}

/// Fills the listed columns with unit vectors orthogonal to every other column.
fn complete_orthonormal<T: Scalar>(u: &mut DenseMatrix<T>, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let n = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|k| !missing.contains(k)).collect();
    for &k in missing {
        // the standard basis vector with the largest component outside the filled span
        let mut best: Option<(T, Vec<T>)> = None;
        for candidate in 0..n {
            let mut x = vec![T::zero(); n];
            x[candidate] = T::one();
            for _ in 0..2 {
                for &f in &filled {
                    let proj = dot(u.col(f), &x);
                    for (xi, &ui) in x.iter_mut().zip(u.col(f)) {
                        *xi -= proj * ui;
                    }
                }
            }
            let nrm = norm2(&x);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, x));
            }
        }
        let (nrm, x) = best.expect("n > 0");
        for (dst, xi) in u.col_mut(k).iter_mut().zip(x) {
            *dst = xi / nrm;
        }
        filled.push(k);
    }
}

/// Default relative cutoff for [`pseudo_inverse`]: `1e-12 · max(rows, cols)`.
pub fn default_rcond(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols) as f64
}

/// Moore-Penrose pseudo-inverse; singular values below `rcond · σ_max` are treated as zero.
pub fn pseudo_inverse<T: Scalar>(a: &DenseMatrix<T>, rcond: T) -> Result<DenseMatrix<T>> {
    let (m, n) = a.shape();
    precondition(m > 0 && n > 0, || "pseudo_inverse of an empty matrix")?;
    precondition(rcond > T::zero() && rcond < T::one(), || "rcond must lie in (0, 1)")?;
    let svd = thin_svd(a)?;
    Ok(pinv_from_svd(&svd, rcond, m, n))
}

fn pinv_from_svd<T: Scalar>(
    svd: &ThinSvdResult<T>,
    rcond: T,
    m: usize,
    n: usize,
) -> DenseMatrix<T> {
    let smax = svd.singular_values.first().copied().unwrap_or(T::zero());
    let mut out = DenseMatrix::zeros(n, m);
    if smax == T::zero() {
        return out;
    }
    let cutoff = rcond * smax;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        let inv = T::one() / s;
        let uk = svd.u.col(k);
        for j in 0..m {
            let f = uk[j] * inv;
            if f == T::zero() {
                continue;
            }
            let dst = out.col_mut(j);
            for (i, d) in dst.iter_mut().enumerate() {
                *d += svd.vt[(k, i)] * f;
            }
        }
    }
    out
}

/// Numerical rank with the same cutoff convention as [`pseudo_inverse`].
pub fn numerical_rank<T: Scalar>(a: &DenseMatrix<T>, rcond: T) -> Result<usize> {
    let svd = thin_svd(a)?;
    let smax = svd.singular_values.first().copied().unwrap_or(T::zero());
    Ok(svd
        .singular_values
        .iter()
        .filter(|&&s| smax > T::zero() && s > rcond * smax)
        .count())
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn least_squares<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    precondition(a.rows() == b.len(), || "least_squares: rhs length mismatch")?;
    if a.cols() == 0 {
        return Ok(vec![]);
    }
    let rcond = T::of(default_rcond(a.rows(), a.cols()));
    let pinv = pseudo_inverse(a, rcond)?;
    Ok(pinv.matvec(b))
}

/// Solves the full-column-rank least-squares problem through Householder QR.
/// Returns `None` if `R` has a (numerically) zero pivot.
pub fn qr_least_squares<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Option<Vec<T>> {
    let (m, n) = a.shape();
    if m < n {
        return None;
    }
    let ThinQr { q, r } = householder_qr(a);
    let qtb = q.tr_matvec(b);
    let scale = (0..n).fold(T::zero(), |s, i| s.max(r[(i, i)].abs()));
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let piv = r[(i, i)];
        if piv.abs() <= scale * T::epsilon() * T::of(n as f64) || piv == T::zero() {
            return None;
        }
        let mut s = qtb[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / piv;
    }
    Some(x)
}

/// Solves a square system by LU with partial pivoting. Returns `None` for singular input.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(n, b.len());
    let mut lu = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, T::zero()), |acc, it| if it.1 > acc.1 { it } else { acc });
        if pv == T::zero() {
            return None;
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            x.swap(k, p);
        }
        let piv = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / piv;
            if f == T::zero() {
                continue;
            }
            lu[(i, k)] = f;
            for j in k + 1..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= lu[(i, j)] * x[j];
        }
        x[i] = s / lu[(i, i)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_defect(u: &DenseMatrix<f64>) -> f64 {
        u.tr_matmul(u).sub(&DenseMatrix::identity(u.cols())).max_abs()
    }

    #[test]
    fn qr_reconstructs_and_is_orthonormal() {
        for (m, n) in [(7, 3), (3, 7), (5, 5)] {
            let a = random(m, n, 3);
            let ThinQr { q, r } = householder_qr(&a);
            assert!(orthonormality_defect(&q) < 1e-14);
            assert!(q.matmul(&r).sub(&a).max_abs() < 1e-14);
        }
    }

    #[test]
    fn svd_of_wide_tall_and_rank_deficient() {
        for (m, n) in [(9, 4), (4, 9), (6, 6)] {
            let a = random(m, n, 11);
            let svd = thin_svd(&a).unwrap();
            assert!(orthonormality_defect(&svd.u) < 1e-12);
            assert!(orthonormality_defect(&svd.vt.transpose()) < 1e-12);
            assert!(svd.reconstruct().sub(&a).frobenius_norm() < 1e-12 * a.frobenius_norm());
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
        // rank one with zero columns: completion keeps U orthonormal
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0, 0.0], &[2.0, 4.0, 0.0], &[0.0, 0.0, 0.0]]);
        let svd = thin_svd(&a).unwrap();
        assert!(orthonormality_defect(&svd.u) < 1e-12);
        assert!((svd.singular_values[0] - 5.0).abs() < 1e-12);
        assert!(svd.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let svd = thin_svd(&DenseMatrix::<f64>::zeros(4, 2)).unwrap();
        assert_eq!(svd.singular_values, vec![0.0, 0.0]);
        assert!(orthonormality_defect(&svd.u) < 1e-15);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = DenseMatrix::<f64>::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(thin_svd(&a).is_err());
    }

    #[test]
    fn pinv_identity_and_diagonal() {
        let i3 = DenseMatrix::<f64>::identity(3);
        assert!(pseudo_inverse(&i3, 1e-12).unwrap().sub(&i3).max_abs() < 1e-15);
        let a = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 0.0]]);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        assert_eq!(p, DenseMatrix::from_rows(&[&[0.5, 0.0], &[0.0, 0.0]]));
    }

    #[test]
    fn pinv_of_zero_matrix_is_zero() {
        let p = pseudo_inverse(&DenseMatrix::<f64>::zeros(3, 2), 1e-12).unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn pinv_rejects_bad_rcond() {
        let a = DenseMatrix::<f64>::identity(2);
        assert!(pseudo_inverse(&a, 0.0).is_err());
        assert!(pseudo_inverse(&a, 1.0).is_err());
    }

    #[test]
    fn pinv_matches_normal_equations_oracle() {
        // (aᵀa)⁻¹aᵀ computed independently by Gaussian elimination
        let a = random(8, 3, 5);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        let ata = a.tr_matmul(&a);
        for i in 0..8 {
            let col_at: Vec<f64> = (0..3).map(|k| a[(i, k)]).collect();
            let expected = lu_solve(&ata, &col_at).unwrap();
            for k in 0..3 {
                assert!((p[(k, i)] - expected[k]).abs() < 1e-12);
            }
        }
        assert!(p.matmul(&a).sub(&DenseMatrix::identity(3)).max_abs() < 1e-10);
    }

    #[test]
    fn penrose_identities() {
        let a = random(6, 4, 17);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        let apa = a.matmul(&p).matmul(&a);
        let pap = p.matmul(&a).matmul(&p);
        let ap = a.matmul(&p);
        let pa = p.matmul(&a);
        assert!(apa.sub(&a).max_abs() < 1e-10);
        assert!(pap.sub(&p).max_abs() < 1e-10);
        assert!(ap.sub(&ap.transpose()).max_abs() < 1e-10);
        assert!(pa.sub(&pa.transpose()).max_abs() < 1e-10);
        let pp = pseudo_inverse(&p, 1e-12).unwrap();
        assert!(pp.sub(&a).frobenius_norm() <= 1e-8 * a.frobenius_norm());
    }

    #[test]
    fn single_precision_svd() {
        let a: DenseMatrix<f32> = random(6, 3, 2).cast();
        let svd = thin_svd(&a).unwrap();
        assert!(svd.reconstruct().sub(&a).frobenius_norm() < 1e-5 * a.frobenius_norm());
    }

    #[test]
    fn qr_least_squares_and_lu() {
        let a = random(10, 4, 8);
        let x_true = vec![1.0, -2.0, 0.5, 3.0];
        let b = a.matvec(&x_true);
        let x = qr_least_squares(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        let y = least_squares(&a, &b).unwrap();
        for (u, v) in y.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        let sing = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(lu_solve(&sing, &[1.0, 2.0]).is_none());
    }
}
