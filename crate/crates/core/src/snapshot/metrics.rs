use log::warn;
use rayon::prelude::*;

use crate::error::{precondition, Result};
use crate::linalg::norm2;

use super::basis::ReducedBasis;
use super::set::{ColumnMeta, SnapshotSet};

/// Relative L2 errors of one reconstructed column, overall and per field.
///
/// A field (or the whole column) whose reference norm is zero has no relative error and
/// is reported as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnError {
    pub mu: f64,
    pub time: f64,
    pub total: Option<f64>,
    pub per_field: Vec<Option<f64>>,
}

/// Mean and max relative L2 errors over a collection of columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSummary {
    pub columns: Vec<ColumnError>,
    pub mean: f64,
    pub max: f64,
    pub mean_per_field: Vec<f64>,
    pub max_per_field: Vec<f64>,
    /// Columns left out of the totals because their reference norm is zero.
    pub excluded: usize,
}

/// Relative error of `approx` against `reference`, per field and overall.
pub fn column_error(meta: ColumnMeta, reference: &[f64], approx: &[f64], n_fields: usize) -> ColumnError {
    let m = reference.len() / n_fields;
    let rel = |a: &[f64], b: &[f64]| {
        let den = norm2(a);
        if den == 0.0 {
            return None;
        }
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Some(norm2(&diff) / den)
    };
    ColumnError {
        mu: meta.mu,
        time: meta.time,
        total: rel(reference, approx),
        per_field: (0..n_fields)
            .map(|f| rel(&reference[f * m..(f + 1) * m], &approx[f * m..(f + 1) * m]))
            .collect(),
    }
}

impl ErrorSummary {
    pub fn from_columns(columns: Vec<ColumnError>) -> Self {
        let n_fields = columns.first().map_or(0, |c| c.per_field.len());
        let stats = |vals: &mut dyn Iterator<Item = Option<f64>>| {
            let (mut sum, mut max, mut n, mut skipped) = (0.0, 0.0f64, 0usize, 0usize);
            for v in vals {
                match v {
                    Some(e) => {
                        sum += e;
                        max = max.max(e);
                        n += 1;
                    }
                    None => skipped += 1,
                }
            }
            (if n > 0 { sum / n as f64 } else { 0.0 }, max, skipped)
        };
        let (mean, max, excluded) = stats(&mut columns.iter().map(|c| c.total));
        let (mut mean_per_field, mut max_per_field) = (Vec::new(), Vec::new());
        for f in 0..n_fields {
            let (m, x, _) = stats(&mut columns.iter().map(|c| c.per_field[f]));
            mean_per_field.push(m);
            max_per_field.push(x);
        }
        if excluded > 0 {
            warn!("{excluded} zero-norm snapshot(s) excluded from the error statistics");
        }
        Self {
            columns,
            mean,
            max,
            mean_per_field,
            max_per_field,
            excluded,
        }
    }

    /// Compares reference and approximate columns pairwise.
    pub fn compare<'a>(
        meta: &[ColumnMeta],
        reference: impl IntoIterator<Item = &'a [f64]>,
        approx: impl IntoIterator<Item = &'a [f64]>,
        n_fields: usize,
    ) -> Result<Self> {
        let reference: Vec<&[f64]> = reference.into_iter().collect();
        let approx: Vec<&[f64]> = approx.into_iter().collect();
        precondition(reference.len() == meta.len() && approx.len() == meta.len(), || {
            "reference, approximation and metadata lengths differ"
        })?;
        precondition(reference.iter().zip(&approx).all(|(a, b)| a.len() == b.len()), || {
            "reference and approximation columns have different lengths"
        })?;
        let cols = meta
            .par_iter()
            .zip(reference.par_iter().zip(approx.par_iter()))
            .map(|(&m, (r, a))| column_error(m, r, a, n_fields))
            .collect();
        Ok(Self::from_columns(cols))
    }
}

/// Reconstruction errors of `W ⊙ UUᵀA` against the raw snapshots of `set`.
pub fn reconstruction_errors(basis: &ReducedBasis, set: &SnapshotSet) -> Result<ErrorSummary> {
    precondition(set.n_cols() > 0, || "empty snapshot set")?;
    precondition(basis.dim() == set.dim(), || "basis and snapshot dimensions differ")?;
    let raw: Vec<Vec<f64>> = (0..set.n_cols()).into_par_iter().map(|j| set.raw_column(j)).collect();
    let rec: Vec<Vec<f64>> = raw
        .par_iter()
        .map(|x| basis.project(x))
        .collect::<Result<_>>()?;
    ErrorSummary::compare(
        set.meta(),
        raw.iter().map(Vec::as_slice),
        rec.iter().map(Vec::as_slice),
        set.n_fields(),
    )
}
