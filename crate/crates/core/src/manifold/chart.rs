use rayon::prelude::*;

use crate::error::{precondition, Result};
use crate::fom::FullState;
use crate::scalar::Scalar;
use crate::snapshot::{ErrorSummary, ReducedBasis, SnapshotSet};

use super::model::AutoencoderModel;

fn check_dims<T: Scalar>(model: &AutoencoderModel<T>, basis: &ReducedBasis) -> Result<()> {
    precondition(model.filtered_dim() == basis.r_rsvd(), || {
        format!(
            "model works on {} filtered coordinates, basis has {} modes",
            model.filtered_dim(),
            basis.r_rsvd()
        )
    })
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn from_f64<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

/// `φ(z) = f⁻¹_filter(φ̃(z))`.
pub fn decode<T: Scalar>(model: &AutoencoderModel<T>, basis: &ReducedBasis, z: &[f64]) -> Result<FullState> {
    check_dims(model, basis)?;
    let y = model.decode_filtered(&from_f64(z))?;
    basis.unfilter_state(&to_f64(&y))
}

/// `ψ(U) = ψ̃(f_filter(U))`.
pub fn encode<T: Scalar>(model: &AutoencoderModel<T>, basis: &ReducedBasis, state: &FullState) -> Result<Vec<f64>> {
    check_dims(model, basis)?;
    let y = basis.filter_state(state)?;
    Ok(to_f64(&model.encode_filtered(&from_f64(&y))?))
}

/// `(φ ∘ ψ)(U)` in physical units.
pub fn round_trip<T: Scalar>(model: &AutoencoderModel<T>, basis: &ReducedBasis, raw: &[f64]) -> Result<Vec<f64>> {
    check_dims(model, basis)?;
    let y = basis.filter(raw)?;
    let z = model.encode_filtered(&from_f64(&y))?;
    basis.unfilter(&to_f64(&model.decode_filtered(&z)?))
}

/// AE-REC: relative L2 error of `φ ∘ ψ` on the raw snapshots of `set`.
pub fn reconstruction_error_nonlinear<T: Scalar>(
    model: &AutoencoderModel<T>,
    basis: &ReducedBasis,
    set: &SnapshotSet,
) -> Result<ErrorSummary> {
    check_dims(model, basis)?;
    precondition(set.n_cols() > 0, || "empty snapshot set")?;
    let raw: Vec<Vec<f64>> = (0..set.n_cols()).into_par_iter().map(|j| set.raw_column(j)).collect();
    let rec: Vec<Vec<f64>> = raw
        .par_iter()
        .map(|x| round_trip(model, basis, x))
        .collect::<Result<_>>()?;
    ErrorSummary::compare(
        set.meta(),
        raw.iter().map(Vec::as_slice),
        rec.iter().map(Vec::as_slice),
        set.n_fields(),
    )
}
