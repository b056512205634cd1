use log::warn;

use crate::error::{precondition, Result};
use crate::fom::FullState;
use crate::linalg::{randomized_svd, DenseMatrix};

use super::normalization::NormalizationVector;
use super::set::SnapshotSet;

/// Orthonormal rSVD modes of a normalised snapshot matrix, with the filtering maps
/// `f(U_h) = Uᵀ(U_h ⊘ W)` and `f⁻¹(y) = (W ⊙ U) y`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedBasis {
    u: DenseMatrix<f64>,
    normalization: NormalizationVector,
    singular_values: Vec<f64>,
}

impl ReducedBasis {
    /// Wraps given modes; columns must be orthonormal to 1e-10.
    pub fn new(u: DenseMatrix<f64>, normalization: NormalizationVector, singular_values: Vec<f64>) -> Result<Self> {
        precondition(u.rows() == normalization.dim(), || {
            format!("basis has {} rows, normalization has {}", u.rows(), normalization.dim())
        })?;
        precondition(singular_values.len() == u.cols(), || "one singular value per mode expected")?;
        u.ensure_finite("basis")?;
        let gram = u.tr_matmul(&u);
        let mut off = 0.0f64;
        for j in 0..gram.cols() {
            for i in 0..gram.rows() {
                let target = if i == j { 1.0 } else { 0.0 };
                off = off.max((gram[(i, j)] - target).abs());
            }
        }
        precondition(off <= 1e-10, || format!("basis columns are not orthonormal (deviation {off:.2e})"))?;
        Ok(Self {
            u,
            normalization,
            singular_values,
        })
    }

    /// Empty basis (`r_rSVD = 0`): every state filters to the empty vector.
    pub fn empty(normalization: NormalizationVector) -> Self {
        Self {
            u: DenseMatrix::zeros(normalization.dim(), 0),
            normalization,
            singular_values: Vec::new(),
        }
    }

    /// Randomized SVD of the snapshot matrix truncated to `r_rsvd` modes.
    ///
    /// The oversampling is reduced when `r_rsvd + oversampling` would exceed the matrix
    /// dimensions.
    pub fn from_snapshots(set: &SnapshotSet, r_rsvd: usize, oversampling: usize, seed: u64) -> Result<Self> {
        let cap = set.dim().min(set.n_cols());
        precondition(r_rsvd >= 1 && r_rsvd <= cap, || {
            format!("r_rSVD = {r_rsvd} must lie in [1, {cap}]")
        })?;
        let p = oversampling.min(cap - r_rsvd);
        if p < oversampling {
            warn!("oversampling reduced from {oversampling} to {p} to fit a {}x{} snapshot matrix", set.dim(), set.n_cols());
        }
        let svd = randomized_svd(set.matrix(), r_rsvd, p, seed)?;
        Ok(Self {
            u: svd.u,
            normalization: set.normalization().clone(),
            singular_values: svd.singular_values,
        })
    }

    #[inline]
    pub fn u(&self) -> &DenseMatrix<f64> {
        &self.u
    }

    pub fn normalization(&self) -> &NormalizationVector {
        &self.normalization
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Number of modes `p = r_rSVD`.
    #[inline]
    pub fn r_rsvd(&self) -> usize {
        self.u.cols()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn n_fields(&self) -> usize {
        self.normalization.n_fields()
    }

    pub fn n_cells(&self) -> usize {
        self.normalization.n_cells()
    }

    /// Leading `r` modes (a nested basis).
    pub fn truncate(&self, r: usize) -> Self {
        let r = r.min(self.r_rsvd());
        Self {
            u: self.u.col_range(0..r),
            normalization: self.normalization.clone(),
            singular_values: self.singular_values[..r].to_vec(),
        }
    }

    /// `W ⊙ U`, the decoder-side modes.
    pub fn weighted_modes(&self) -> DenseMatrix<f64> {
        let mut wu = self.u.clone();
        wu.scale_rows(self.normalization.w());
        wu
    }

    /// Rows `dofs` of `W ⊙ U`, built without forming the full product.
    pub fn weighted_rows(&self, dofs: &[usize]) -> DenseMatrix<f64> {
        let w = self.normalization.w();
        DenseMatrix::from_fn(dofs.len(), self.r_rsvd(), |i, k| self.u[(dofs[i], k)] * w[dofs[i]])
    }

    /// `Uᵀ(x ⊘ W)`.
    pub fn filter(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let a = self.normalization.normalize(raw)?;
        Ok(self.u.tr_matvec(&a))
    }

    /// `(W ⊙ U) y`.
    pub fn unfilter(&self, coords: &[f64]) -> Result<Vec<f64>> {
        precondition(coords.len() == self.r_rsvd(), || {
            format!("expected {} filtered coordinates, got {}", self.r_rsvd(), coords.len())
        })?;
        // same per-entry products as `weighted_modes().matvec` so all decode paths agree bitwise
        let w = self.normalization.w();
        let mut x = vec![0.0; self.dim()];
        for (k, &yk) in coords.iter().enumerate() {
            if yk == 0.0 {
                continue;
            }
            for ((xi, &u), &wi) in x.iter_mut().zip(self.u.col(k)).zip(w) {
                *xi += (u * wi) * yk;
            }
        }
        Ok(x)
    }

    pub fn filter_state(&self, state: &FullState) -> Result<Vec<f64>> {
        self.filter(&state.values)
    }

    pub fn unfilter_state(&self, coords: &[f64]) -> Result<FullState> {
        FullState::new(self.unfilter(coords)?, self.n_fields())
    }

    /// `f⁻¹(f(x))`, the `W`-weighted orthogonal projection onto the modes.
    pub fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.unfilter(&self.filter(raw)?)
    }

    /// Filtered coordinates `UᵀA` of every column of a normalised set (`p × n`).
    pub fn filter_set(&self, set: &SnapshotSet) -> Result<DenseMatrix<f64>> {
        precondition(set.normalization() == &self.normalization, || {
            "snapshot set was normalised with a different W"
        })?;
        Ok(self.u.tr_matmul(set.matrix()))
    }
}
