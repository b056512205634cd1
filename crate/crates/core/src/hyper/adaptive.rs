use log::warn;

use crate::error::{precondition, Result};
use crate::fom::Mesh1d;
use crate::instrument;
use crate::linalg::DenseMatrix;
use crate::manifold::AutoencoderModel;
use crate::scalar::Scalar;
use crate::snapshot::ReducedBasis;

use super::points::{MagicPointSet, SubmeshPlan};
use super::selection::argmax_free;

/// Per-cell C-UP score `max_j Σ_fields O²` with `O = (W ⊙ U)(Φ(z_t) − Φ(z_prev))`.
pub fn sensitivity_scores<T: Scalar>(
    model: &AutoencoderModel<T>,
    basis: &ReducedBasis,
    z_t: &[f64],
    z_prev: &[f64],
) -> Result<Vec<f64>> {
    precondition(model.filtered_dim() == basis.r_rsvd(), || "model and basis disagree on r_rSVD")?;
    precondition(z_t.len() == model.latent_dim() && z_prev.len() == model.latent_dim(), || {
        "latent vectors have the wrong length"
    })?;
    let cast = |z: &[f64]| z.iter().map(|&v| T::of(v)).collect::<Vec<T>>();
    let jt = model.decoder_jacobian(&cast(z_t))?;
    let jp = model.decoder_jacobian(&cast(z_prev))?;
    let (p, r) = jt.shape();
    let delta = DenseMatrix::from_fn(p, r, |i, j| jt[(i, j)].to_f64_lossy() - jp[(i, j)].to_f64_lossy());
    let mut o = basis.u().matmul(&delta);
    o.scale_rows(basis.normalization().w());
    let m = basis.n_cells();
    let c = basis.n_fields();
    instrument::add_full_state_ops(o.rows() * r);
    let mut scores = vec![0.0f64; m];
    for j in 0..r {
        let col = o.col(j);
        for (k, s) in scores.iter_mut().enumerate() {
            let v: f64 = (0..c).map(|f| col[f * m + k] * col[f * m + k]).sum();
            *s = s.max(v);
        }
    }
    Ok(scores)
}

/// C-UP magic-point update: the `r_h` cells with the largest decoder-sensitivity change
/// plus the forced boundary cells, with their stencil submesh.
///
/// When the sensitivity difference vanishes identically (for instance a linear decoder)
/// the previous plan is kept and a warning is logged.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_update<T: Scalar>(
    model: &AutoencoderModel<T>,
    basis: &ReducedBasis,
    z_t: &[f64],
    z_prev: &[f64],
    r_h: usize,
    forced: &[usize],
    mesh: &Mesh1d,
    previous: &SubmeshPlan,
) -> Result<SubmeshPlan> {
    let m = mesh.n_cells();
    precondition(basis.n_cells() == m, || "basis and mesh disagree on the cell count")?;
    precondition(r_h >= 1 && r_h + forced.len() <= m, || {
        format!("r_h = {r_h} with {} forced cells does not fit {m} cells", forced.len())
    })?;
    let scores = sensitivity_scores(model, basis, z_t, z_prev)?;
    if scores.iter().all(|&s| s == 0.0) {
        warn!("c-up: decoder sensitivity unchanged; keeping the previous magic points");
        return Ok(previous.clone());
    }
    let mut taken = vec![false; m];
    for &c in forced {
        precondition(c < m, || format!("forced cell {c} outside mesh"))?;
        taken[c] = true;
    }
    let mut selected = Vec::with_capacity(r_h);
    let mut picked = Vec::with_capacity(r_h);
    for _ in 0..r_h {
        let k = argmax_free(&scores, &taken).expect("free cell available");
        taken[k] = true;
        selected.push(k);
        picked.push(scores[k]);
    }
    let magic = MagicPointSet::new(forced.to_vec(), selected, picked, m)?;
    SubmeshPlan::new(magic, mesh, basis.n_fields())
}
