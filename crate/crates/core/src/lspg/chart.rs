use crate::error::{precondition, Result};
use crate::fom::FullState;
use crate::instrument;
use crate::linalg::DenseMatrix;
use crate::manifold::{self, AutoencoderModel};
use crate::scalar::Scalar;
use crate::snapshot::ReducedBasis;

/// Trial manifold `φ` of the ROM.
#[derive(Clone, Debug)]
pub enum Chart<T: Scalar = f64> {
    /// `φ(z) = z`, `r = d` (the full space).
    Identity { n_fields: usize, n_cells: usize },
    /// `φ(z) = (W ⊙ U) z`: LM-LSPG.
    Linear(ReducedBasis),
    /// `φ(z) = (W ⊙ U) φ̃(z)`: NM-LSPG.
    Nonlinear {
        model: AutoencoderModel<T>,
        basis: ReducedBasis,
    },
}

impl<T: Scalar> Chart<T> {
    pub fn nonlinear(model: AutoencoderModel<T>, basis: ReducedBasis) -> Result<Self> {
        precondition(model.filtered_dim() == basis.r_rsvd(), || {
            format!(
                "model works on {} filtered coordinates, basis has {} modes",
                model.filtered_dim(),
                basis.r_rsvd()
            )
        })?;
        Ok(Chart::Nonlinear { model, basis })
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Chart::Identity { n_fields, n_cells } => n_fields * n_cells,
            Chart::Linear(b) => b.r_rsvd(),
            Chart::Nonlinear { model, .. } => model.latent_dim(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Chart::Identity { n_fields, n_cells } => n_fields * n_cells,
            Chart::Linear(b) | Chart::Nonlinear { basis: b, .. } => b.dim(),
        }
    }

    pub fn n_fields(&self) -> usize {
        match self {
            Chart::Identity { n_fields, .. } => *n_fields,
            Chart::Linear(b) | Chart::Nonlinear { basis: b, .. } => b.n_fields(),
        }
    }

    pub fn basis(&self) -> Option<&ReducedBasis> {
        match self {
            Chart::Identity { .. } => None,
            Chart::Linear(b) | Chart::Nonlinear { basis: b, .. } => Some(b),
        }
    }

    /// `ψ(U)`.
    pub fn encode(&self, state: &FullState) -> Result<Vec<f64>> {
        precondition(state.dim() == self.dim() && state.n_fields == self.n_fields(), || {
            "state does not match the chart"
        })?;
        instrument::add_full_state_ops(state.dim());
        match self {
            Chart::Identity { .. } => Ok(state.values.clone()),
            Chart::Linear(b) => b.filter_state(state),
            Chart::Nonlinear { model, basis } => manifold::encode(model, basis, state),
        }
    }

    /// `φ(z)` on the whole mesh.
    pub fn decode(&self, z: &[f64]) -> Result<FullState> {
        precondition(z.len() == self.latent_dim(), || {
            format!("chart expects {} latent coordinates, got {}", self.latent_dim(), z.len())
        })?;
        instrument::add_full_state_ops(self.dim());
        match self {
            Chart::Identity { .. } => FullState::new(z.to_vec(), self.n_fields()),
            Chart::Linear(b) => FullState::new(b.weighted_modes().matvec(z), b.n_fields()),
            Chart::Nonlinear { basis, .. } => {
                FullState::new(basis.weighted_modes().matvec(&self.filtered(z)?), basis.n_fields())
            }
        }
    }

    /// Filtered coordinates `φ̃(z)` (the latent vector itself for linear charts).
    pub fn filtered(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Chart::Identity { .. } | Chart::Linear(_) => Ok(z.to_vec()),
            Chart::Nonlinear { model, .. } => {
                let y = model.decode_filtered(&cast_in::<T>(z))?;
                Ok(y.iter().map(|v| v.to_f64_lossy()).collect())
            }
        }
    }

    /// `φ̃(z)` and `∂φ̃/∂z`; `None` means the identity Jacobian.
    pub fn filtered_with_jacobian(&self, z: &[f64]) -> Result<(Vec<f64>, Option<DenseMatrix<f64>>)> {
        match self {
            Chart::Identity { .. } | Chart::Linear(_) => Ok((z.to_vec(), None)),
            Chart::Nonlinear { model, .. } => {
                let (y, j) = model.decode_with_jacobian(&cast_in::<T>(z))?;
                Ok((y.iter().map(|v| v.to_f64_lossy()).collect(), Some(j.cast())))
            }
        }
    }

    /// `ψ̃(y)` (identity for linear charts).
    pub fn encode_filtered(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Chart::Identity { .. } | Chart::Linear(_) => Ok(y.to_vec()),
            Chart::Nonlinear { model, .. } => {
                let z = model.encode_filtered(&cast_in::<T>(y))?;
                Ok(z.iter().map(|v| v.to_f64_lossy()).collect())
            }
        }
    }
}

fn cast_in<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}
