use log::warn;
use rayon::prelude::*;

use crate::error::{precondition, Error, Result};
use crate::fom::Mesh1d;
use crate::linalg::{default_rcond, householder_qr, nnls, norm2, pseudo_inverse, DenseMatrix};

use super::points::MagicPointSet;

/// Relative size below which the gappy residual counts as vanished.
const VANISHED: f64 = 1e-24;

fn check_inputs(u_hr: &DenseMatrix<f64>, r_h: usize, forced: &[usize], n_fields: usize, mesh: &Mesh1d) -> Result<()> {
    let m = mesh.n_cells();
    precondition(n_fields > 0 && u_hr.rows() == n_fields * m, || {
        format!("basis has {} rows, expected {n_fields} x {m}", u_hr.rows())
    })?;
    precondition(u_hr.cols() > 0, || "hyper-reduction basis has no columns")?;
    u_hr.ensure_finite("hyper-reduction basis")?;
    precondition(r_h >= 1, || "r_h must be at least 1")?;
    let mut f = forced.to_vec();
    f.sort_unstable();
    f.dedup();
    precondition(f.len() == forced.len() && f.iter().all(|&c| c < m), || "invalid forced cells")?;
    precondition(r_h + forced.len() <= m, || {
        format!("r_h = {r_h} plus {} forced cells exceeds the {m} mesh cells", forced.len())
    })
}

/// Full-state rows of `cells`, field-major.
pub(crate) fn dofs_of(cells: &[usize], n_fields: usize, n_cells: usize) -> Vec<usize> {
    (0..n_fields)
        .flat_map(|f| cells.iter().map(move |&c| f * n_cells + c))
        .collect()
}

/// Per-cell sum over fields and columns of squared entries.
pub(crate) fn cell_scores(r: &DenseMatrix<f64>, n_fields: usize) -> Vec<f64> {
    let m = r.rows() / n_fields;
    let mut s = vec![0.0; m];
    for j in 0..r.cols() {
        for (i, v) in r.col(j).iter().enumerate() {
            s[i % m] += v * v;
        }
    }
    s
}

/// Highest-scoring cell not yet taken; ties go to the lowest index.
const TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn argmax_free(scores: &[f64], taken: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if taken[k] {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(k);
        }
    }
    best
}

/// Gappy reconstruction residual `A − A (P A)† (P A)` for `A = u_hr` and the rows of `cells`.
pub fn gappy_residual(u_hr: &DenseMatrix<f64>, cells: &[usize], n_fields: usize) -> Result<DenseMatrix<f64>> {
    if cells.is_empty() {
        return Ok(u_hr.clone());
    }
    let m = u_hr.rows() / n_fields;
    let pu = u_hr.select_rows(&dofs_of(cells, n_fields, m));
    let pinv = pseudo_inverse(&pu, default_rcond(pu.rows(), pu.cols()))?;
    let coef = pinv.matmul(&pu);
    Ok(u_hr.sub(&u_hr.matmul(&coef)))
}

/// Gappy DEIM greedy: forced cells first, then repeatedly the cell with the largest
/// field-summed squared reconstruction residual `r = A − U(PU)†(PA)`, `A = U = u_hr`.
///
/// Once `PU` reaches full column rank the residual vanishes; the remaining cells are then
/// picked by row norm of `u_hr` and a warning is logged.
pub fn select_deim_greedy(
    u_hr: &DenseMatrix<f64>,
    r_h: usize,
    forced: &[usize],
    n_fields: usize,
    mesh: &Mesh1d,
) -> Result<MagicPointSet> {
    check_inputs(u_hr, r_h, forced, n_fields, mesh)?;
    let m = mesh.n_cells();
    let row_norms = cell_scores(u_hr, n_fields);
    let scale = row_norms.iter().cloned().fold(0.0, f64::max);
    let mut taken = vec![false; m];
    for &c in forced {
        taken[c] = true;
    }
    let mut cells = forced.to_vec();
    let mut selected = Vec::with_capacity(r_h);
    let mut scores = Vec::with_capacity(r_h);
    let mut exhausted = false;
    while selected.len() < r_h {
        if !exhausted {
            let res = gappy_residual(u_hr, &cells, n_fields)?;
            let s = cell_scores(&res, n_fields);
            let k = argmax_free(&s, &taken).expect("free cell available");
            if s[k] > VANISHED * scale {
                taken[k] = true;
                cells.push(k);
                selected.push(k);
                scores.push(s[k]);
                continue;
            }
            warn!(
                "deim: gappy residual vanished after {} cells; selecting the rest by basis row norm",
                cells.len()
            );
            exhausted = true;
        }
        let k = argmax_free(&row_norms, &taken).expect("free cell available");
        taken[k] = true;
        cells.push(k);
        selected.push(k);
        scores.push(row_norms[k]);
    }
    MagicPointSet::new(forced.to_vec(), selected, scores, m)
}

fn sopt_score_unchecked(p_u: &DenseMatrix<f64>) -> f64 {
    let (rows, cols) = p_u.shape();
    if cols == 0 || rows < cols {
        return 0.0;
    }
    let mut a = p_u.clone();
    for j in 0..cols {
        let n = norm2(a.col(j));
        if n == 0.0 {
            return 0.0;
        }
        a.col_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    let qr = householder_qr(&a);
    // geometric mean of |R_ii|, in logs to avoid underflow
    let mut log_sum = 0.0;
    for i in 0..cols {
        let d = qr.r[(i, i)].abs();
        if d == 0.0 {
            return 0.0;
        }
        log_sum += d.ln();
    }
    (log_sum / cols as f64).exp().clamp(0.0, 1.0)
}

/// S-optimality `𝒮(PU) = (√det((PU)ᵀPU) / Πᵢ‖(PU)ᵢ‖)^{1/r_hr}`.
///
/// Lies in `[0, 1]` and equals 1 exactly for orthonormal columns; more columns than rows
/// give 0.
pub fn sopt_score(p_u: &DenseMatrix<f64>) -> Result<f64> {
    precondition(p_u.cols() > 0, || "sopt_score of a matrix without columns")?;
    p_u.ensure_finite("sopt_score input")?;
    for j in 0..p_u.cols() {
        precondition(norm2(p_u.col(j)) > 0.0, || format!("column {j} of PU has zero norm"))?;
    }
    Ok(sopt_score_unchecked(p_u))
}

/// Greedy S-OPT: at each step adds the cell (all its field rows jointly) that maximizes
/// the score of the grown row set.
///
/// If every candidate scores zero (always the case while the row set is smaller than
/// `r_hr`) the DEIM residual rule picks the cell instead.
pub fn select_sopt_greedy(
    u_hr: &DenseMatrix<f64>,
    r_h: usize,
    forced: &[usize],
    n_fields: usize,
    mesh: &Mesh1d,
) -> Result<MagicPointSet> {
    check_inputs(u_hr, r_h, forced, n_fields, mesh)?;
    let m = mesh.n_cells();
    let mut warned = false;
    let mut taken = vec![false; m];
    for &c in forced {
        taken[c] = true;
    }
    let mut cells = forced.to_vec();
    let mut selected = Vec::with_capacity(r_h);
    let mut scores = Vec::with_capacity(r_h);
    while selected.len() < r_h {
        let s: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|k| {
                if taken[k] {
                    return 0.0;
                }
                let mut trial = cells.clone();
                trial.push(k);
                sopt_score_unchecked(&u_hr.select_rows(&dofs_of(&trial, n_fields, m)))
            })
            .collect();
        let mut k = argmax_free(&s, &taken).expect("free cell available");
        // scores equal up to round-off count as ties and go to the lowest index
        let best = s[k];
        k = (0..m).find(|&j| !taken[j] && s[j] >= best - TIE_TOLERANCE * best).unwrap_or(k);
        let mut score = s[k];
        if score == 0.0 {
            if !warned {
                warn!("s-opt: all candidate scores vanish at step {}; using the deim rule", cells.len());
                warned = true;
            }
            let res = cell_scores(&gappy_residual(u_hr, &cells, n_fields)?, n_fields);
            k = argmax_free(&res, &taken).expect("free cell available");
            score = 0.0;
        }
        taken[k] = true;
        cells.push(k);
        selected.push(k);
        scores.push(score);
    }
    MagicPointSet::new(forced.to_vec(), selected, scores, m)
}

/// Non-negative quadrature weights of ECSW and the cells they live on.
#[derive(Clone, Debug, PartialEq)]
pub struct EcswWeights {
    /// `Q ∈ R^d_{≥0}`, one weight per degree of freedom.
    pub weights: Vec<f64>,
    /// `‖U_hrᵀQ − c‖₂`.
    pub residual_norm: f64,
    /// `‖c‖₂`.
    pub target_norm: f64,
    /// Whether `‖U_hrᵀQ − c‖ < τ‖c‖`.
    pub satisfied: bool,
    /// Cells with a nonzero weight in any field, scored by their summed weight.
    pub support: MagicPointSet,
}

/// Sparse non-negative weights with `U_hrᵀ Q ≈ c`, `c_j = Σᵢ (U_hr)_{ij}`, by NNLS.
pub fn compute_ecsw_weights(u_hr: &DenseMatrix<f64>, tolerance: f64, n_fields: usize) -> Result<EcswWeights> {
    precondition(tolerance > 0.0 && tolerance < 1.0, || "ECSW tolerance must lie in (0, 1)")?;
    precondition(n_fields > 0 && u_hr.rows() % n_fields == 0, || "basis rows not divisible by fields")?;
    precondition(u_hr.cols() > 0, || "hyper-reduction basis has no columns")?;
    let d = u_hr.rows();
    let m = d / n_fields;
    let c: Vec<f64> = (0..u_hr.cols()).map(|j| u_hr.col(j).iter().sum()).collect();
    let sol = nnls(&u_hr.transpose(), &c)?;
    if sol.weights.iter().any(|&q| q < 0.0) {
        return Err(Error::Data("nnls returned a negative weight".into()));
    }
    let target_norm = norm2(&c);
    let mut cell_weight = vec![0.0; m];
    for (i, &q) in sol.weights.iter().enumerate() {
        cell_weight[i % m] += q;
    }
    let cells: Vec<usize> = (0..m).filter(|&k| cell_weight[k] > 0.0).collect();
    let scores = cells.iter().map(|&k| cell_weight[k]).collect();
    let support = MagicPointSet::new(Vec::new(), cells, scores, m)?;
    Ok(EcswWeights {
        satisfied: sol.residual_norm < tolerance * target_norm,
        residual_norm: sol.residual_norm,
        target_norm,
        weights: sol.weights,
        support,
    })
}
