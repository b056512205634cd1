use crate::error::{precondition, Result};
use crate::fom::{FomTrajectory, FullState};
use crate::linalg::DenseMatrix;

use super::normalization::NormalizationVector;

/// Whether a snapshot collection is used for fitting or for validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotRole {
    Train,
    Test,
}

/// Parameter and time of one snapshot column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColumnMeta {
    pub mu: f64,
    pub time: f64,
}

/// Raw (dimensional) full-order vectors with their metadata, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSnapshots {
    pub matrix: DenseMatrix<f64>,
    pub meta: Vec<ColumnMeta>,
    pub n_fields: usize,
    pub n_cells: usize,
}

impl RawSnapshots {
    pub fn new(matrix: DenseMatrix<f64>, meta: Vec<ColumnMeta>, n_fields: usize, n_cells: usize) -> Result<Self> {
        precondition(n_fields > 0 && matrix.rows() == n_fields * n_cells, || {
            format!("matrix has {} rows, expected {n_fields}·{n_cells}", matrix.rows())
        })?;
        precondition(matrix.cols() == meta.len(), || {
            format!("{} columns but {} metadata records", matrix.cols(), meta.len())
        })?;
        Ok(Self {
            matrix,
            meta,
            n_fields,
            n_cells,
        })
    }

    /// States of one trajectory, keeping every `stride`-th time instant starting at `t₀`.
    pub fn from_trajectory(traj: &FomTrajectory, stride: usize) -> Result<Self> {
        Self::from_trajectories(std::slice::from_ref(traj), stride)
    }

    /// Concatenates subsampled trajectories in the given order.
    pub fn from_trajectories(trajs: &[FomTrajectory], stride: usize) -> Result<Self> {
        precondition(stride >= 1, || "snapshot stride must be at least 1")?;
        let first = trajs
            .first()
            .and_then(|t| t.states.first())
            .ok_or_else(|| crate::Error::Precondition("no snapshots to collect".into()))?;
        let (n_fields, n_cells) = (first.n_fields, first.n_cells());
        let mut meta = Vec::new();
        let mut columns = Vec::new();
        for t in trajs {
            for (k, (state, &time)) in t.states.iter().zip(&t.times).enumerate() {
                if k % stride == 0 {
                    precondition(state.n_fields == n_fields && state.n_cells() == n_cells, || {
                        "trajectories live on different meshes"
                    })?;
                    meta.push(ColumnMeta { mu: t.mu, time });
                    columns.push(state.values.clone());
                }
            }
        }
        let matrix = DenseMatrix::from_columns(n_fields * n_cells, &columns)?;
        Self::new(matrix, meta, n_fields, n_cells)
    }

    pub fn from_states<'a>(
        states: impl IntoIterator<Item = (ColumnMeta, &'a FullState)>,
        n_fields: usize,
        n_cells: usize,
    ) -> Result<Self> {
        let mut meta = Vec::new();
        let mut columns = Vec::new();
        for (m, s) in states {
            precondition(s.n_fields == n_fields && s.n_cells() == n_cells, || "state on a different mesh")?;
            meta.push(m);
            columns.push(s.values.clone());
        }
        let matrix = DenseMatrix::from_columns(n_fields * n_cells, &columns)?;
        Self::new(matrix, meta, n_fields, n_cells)
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.matrix.cols()).map(|j| self.matrix.col(j))
    }

    pub fn state(&self, j: usize) -> FullState {
        FullState {
            values: self.matrix.col(j).to_vec(),
            n_fields: self.n_fields,
        }
    }
}

/// Normalised snapshot matrix `A = [U_{μ,t} ⊘ W]` with column metadata.
#[derive(Clone, Debug)]
pub struct SnapshotSet {
    matrix: DenseMatrix<f64>,
    meta: Vec<ColumnMeta>,
    normalization: NormalizationVector,
    role: SnapshotRole,
    n_fields: usize,
}

impl SnapshotSet {
    pub fn from_raw(raw: &RawSnapshots, normalization: &NormalizationVector, role: SnapshotRole) -> Result<Self> {
        precondition(raw.dim() == normalization.dim() && raw.n_fields == normalization.n_fields(), || {
            format!(
                "snapshots of dimension {} do not match normalization of dimension {}",
                raw.dim(),
                normalization.dim()
            )
        })?;
        raw.matrix.ensure_finite("snapshot matrix")?;
        let w = normalization.w();
        let mut matrix = raw.matrix.clone();
        for j in 0..matrix.cols() {
            for (x, wi) in matrix.col_mut(j).iter_mut().zip(w) {
                *x /= wi;
            }
        }
        Ok(Self {
            matrix,
            meta: raw.meta.clone(),
            normalization: normalization.clone(),
            role,
            n_fields: raw.n_fields,
        })
    }

    #[inline]
    pub fn matrix(&self) -> &DenseMatrix<f64> {
        &self.matrix
    }

    pub fn meta(&self) -> &[ColumnMeta] {
        &self.meta
    }

    pub fn normalization(&self) -> &NormalizationVector {
        &self.normalization
    }

    pub fn role(&self) -> SnapshotRole {
        self.role
    }

    pub fn n_fields(&self) -> usize {
        self.n_fields
    }

    pub fn n_cells(&self) -> usize {
        self.matrix.rows() / self.n_fields
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Column `j` mapped back to physical units, `W ⊙ A_j`.
    pub fn raw_column(&self, j: usize) -> Vec<f64> {
        self.matrix
            .col(j)
            .iter()
            .zip(self.normalization.w())
            .map(|(a, w)| a * w)
            .collect()
    }
}
