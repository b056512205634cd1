use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{precondition, Result};
use crate::scalar::Scalar;

use super::decomp::{householder_qr, thin_svd, ThinQr, ThinSvdResult};
use super::matrix::DenseMatrix;

/// Oversampling used when callers do not choose one.
pub const DEFAULT_OVERSAMPLING: usize = 10;

/// Gaussian sketch `Ω ∈ R^{cols×l}` drawn from a ChaCha stream seeded with `seed`.
pub fn gaussian_sketch<T: Scalar>(cols: usize, l: usize, seed: u64) -> DenseMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(cols, l, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        T::of(x)
    })
}

/// Sketch dimension `l = rank + oversampling`.
#[inline]
pub fn sketch_dimension(rank: usize, oversampling: usize) -> usize {
    rank + oversampling
}

/// Randomized SVD of `a` truncated to `rank` triplets.
///
/// Sketch `Y = AΩ` with `l = rank + oversampling` Gaussian columns, orthonormalise
/// `Y = QR`, project `S = QᵀA`, take the thin SVD `S = Ũ Σ Ṽ` and lift `U = QŨ`.
/// The two products are split over column blocks by the matrix kernel.
pub fn randomized_svd<T: Scalar>(
    a: &DenseMatrix<T>,
    rank: usize,
    oversampling: usize,
    seed: u64,
) -> Result<ThinSvdResult<T>> {
    let (m, n) = a.shape();
    let l = sketch_dimension(rank, oversampling);
    precondition(rank >= 1, || "randomized_svd: rank must be at least 1")?;
    precondition(l <= m.min(n), || {
        format!("randomized_svd: rank + oversampling = {l} exceeds min({m}, {n})")
    })?;
    a.ensure_finite("randomized_svd input")?;

    let omega = gaussian_sketch::<T>(n, l, seed);
    let y = a.matmul(&omega);
    let ThinQr { q, .. } = householder_qr(&y);
    let s = q.tr_matmul(a);
    let small = thin_svd(&s)?.truncate(rank);
    Ok(ThinSvdResult {
        u: q.matmul(&small.u),
        singular_values: small.singular_values,
        vt: small.vt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sketch_dimension_adds_oversampling() {
        assert_eq!(sketch_dimension(150, 10), 160);
        let omega = gaussian_sketch::<f64>(200, 160, 1);
        assert_eq!(omega.shape(), (200, 160));
    }

    #[test]
    fn embedded_diagonal_singular_values() {
        let mut a = DenseMatrix::<f64>::zeros(10, 5);
        a[(0, 0)] = 3.0;
        a[(1, 1)] = 2.0;
        a[(2, 2)] = 1.0;
        let svd = randomized_svd(&a, 3, 2, 7).unwrap();
        for (s, e) in svd.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::<f64>::from_fn(30, 20, |_, _| rng.random_range(-1.0..1.0));
        let s1 = randomized_svd(&a, 4, 5, 42).unwrap();
        let s2 = randomized_svd(&a, 4, 5, 42).unwrap();
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.singular_values, s2.singular_values);
    }

    #[test]
    fn dimension_and_data_errors() {
        let a = DenseMatrix::<f64>::identity(5);
        assert!(randomized_svd(&a, 0, 1, 0).is_err());
        assert!(randomized_svd(&a, 3, 3, 0).is_err());
        let mut b = a.clone();
        b[(1, 1)] = f64::INFINITY;
        assert!(randomized_svd(&b, 2, 1, 0).is_err());
    }

    #[test]
    fn single_precision_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = DenseMatrix::<f32>::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let r = DenseMatrix::<f32>::from_fn(25, 3, |_, _| rng.random_range(-1.0..1.0));
        let a = l.matmul(&r.transpose());
        let svd = randomized_svd(&a, 3, 4, 1).unwrap();
        let proj = svd.u.matmul(&svd.u.tr_matmul(&a));
        assert!(proj.sub(&a).frobenius_norm() < 1e-4 * a.frobenius_norm());
    }
}
