use crate::error::{precondition, Result};
use crate::fom::{FomTrajectory, Mesh1d};
use crate::snapshot::{build_normalization, ColumnMeta, RawSnapshots, ReducedBasis, SnapshotRole, SnapshotSet};

/// Residual snapshots `G_{μ,t}` collected at the Newton iterates of training runs,
/// normalised with their own `W_G`.
#[derive(Clone, Debug)]
pub struct ResidualSnapshotSet {
    raw: RawSnapshots,
    set: SnapshotSet,
}

impl ResidualSnapshotSet {
    /// Keeps every `stride`-th recorded residual of each trajectory. Trajectories must have
    /// been run with `NewtonSettings::record_residuals`.
    pub fn from_trajectories(trajs: &[FomTrajectory], stride: usize, mesh: &Mesh1d) -> Result<Self> {
        precondition(stride >= 1, || "residual stride must be at least 1")?;
        let n_fields = trajs
            .first()
            .and_then(|t| t.states.first())
            .map(|s| s.n_fields)
            .ok_or_else(|| crate::Error::Precondition("no trajectories given".into()))?;
        let mut meta = Vec::new();
        let mut columns = Vec::new();
        for t in trajs {
            for (step, g) in t.residual_snapshots.iter().step_by(stride) {
                meta.push(ColumnMeta {
                    mu: t.mu,
                    time: *step as f64 * t.dt,
                });
                columns.push(g.clone());
            }
        }
        precondition(!columns.is_empty(), || {
            "trajectories carry no residual snapshots (enable record_residuals)"
        })?;
        let d = n_fields * mesh.n_cells();
        let matrix = crate::linalg::DenseMatrix::from_columns(d, &columns)?;
        Self::from_raw(RawSnapshots::new(matrix, meta, n_fields, mesh.n_cells())?, mesh)
    }

    /// Residual snapshots already gathered into a matrix (e.g. read back from disk).
    pub fn from_raw(raw: RawSnapshots, mesh: &Mesh1d) -> Result<Self> {
        precondition(raw.n_cols() > 0, || "no residual snapshots")?;
        precondition(raw.n_cells == mesh.n_cells(), || "residual snapshots do not match the mesh")?;
        let w_g = build_normalization(raw.columns(), raw.n_fields, mesh)?;
        let set = SnapshotSet::from_raw(&raw, &w_g, SnapshotRole::Train)?;
        Ok(Self { raw, set })
    }

    pub fn raw(&self) -> &RawSnapshots {
        &self.raw
    }

    /// The residuals normalised by `W_G`.
    pub fn set(&self) -> &SnapshotSet {
        &self.set
    }

    pub fn n_cols(&self) -> usize {
        self.set.n_cols()
    }

    /// Residual basis `U_G` of rank `r_g` (carrying `W_G`).
    pub fn basis(&self, r_g: usize, oversampling: usize, seed: u64) -> Result<ReducedBasis> {
        let r = r_g.min(self.set.n_cols()).min(self.set.dim());
        ReducedBasis::from_snapshots(&self.set, r, oversampling, seed)
    }
}
