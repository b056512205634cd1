use crate::error::{precondition, Error, Result};
use crate::fom::Mesh1d;
use crate::linalg::norm2;

/// Physical normalisation `W = N ⊘ V` of monolithic multi-field states.
///
/// `N` repeats the per-field maximum L2 norm over the cells of that field, `V` repeats the
/// cell measures once per field.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationVector {
    field_norms: Vec<f64>,
    n: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl NormalizationVector {
    /// Assembles `N`, `V` and `W` from per-field norms and cell measures.
    pub fn from_field_norms(field_norms: &[f64], cell_measures: &[f64]) -> Result<Self> {
        precondition(!field_norms.is_empty() && !cell_measures.is_empty(), || {
            "normalization needs at least one field and one cell"
        })?;
        for (field, &nf) in field_norms.iter().enumerate() {
            if !(nf.is_finite() && nf > 0.0) {
                return Err(Error::DegenerateNormalization { field });
            }
        }
        precondition(cell_measures.iter().all(|&m| m.is_finite() && m > 0.0), || {
            "cell measures must be positive"
        })?;
        let m = cell_measures.len();
        let d = m * field_norms.len();
        let mut n = Vec::with_capacity(d);
        let mut v = Vec::with_capacity(d);
        for &nf in field_norms {
            n.extend(std::iter::repeat_n(nf, m));
            v.extend_from_slice(cell_measures);
        }
        let w = n.iter().zip(&v).map(|(a, b)| a / b).collect();
        Ok(Self {
            field_norms: field_norms.to_vec(),
            n,
            v,
            w,
        })
    }

    #[inline]
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn n(&self) -> &[f64] {
        &self.n
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn field_norms(&self) -> &[f64] {
        &self.field_norms
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.v[..self.n_cells()]
    }

    pub fn n_fields(&self) -> usize {
        self.field_norms.len()
    }

    pub fn n_cells(&self) -> usize {
        self.w.len() / self.field_norms.len()
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `x ⊘ W`.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.check_len(raw.len())?;
        Ok(raw.iter().zip(&self.w).map(|(x, w)| x / w).collect())
    }

    /// `x ⊙ W`.
    pub fn denormalize(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        self.check_len(normalized.len())?;
        Ok(normalized.iter().zip(&self.w).map(|(x, w)| x * w).collect())
    }

    /// Entries of `W` at the given degrees of freedom.
    pub fn restrict(&self, dofs: &[usize]) -> Vec<f64> {
        dofs.iter().map(|&i| self.w[i]).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        precondition(len == self.w.len(), || {
            format!("vector of length {len} does not match normalization of length {}", self.w.len())
        })
    }
}

/// Builds `W` from raw full-order vectors (states or residuals) laid out field-major.
pub fn build_normalization<'a, I>(columns: I, n_fields: usize, mesh: &Mesh1d) -> Result<NormalizationVector>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    precondition(n_fields > 0, || "n_fields must be positive")?;
    let m = mesh.n_cells();
    let d = m * n_fields;
    let mut maxima = vec![0.0f64; n_fields];
    let mut count = 0usize;
    for col in columns {
        precondition(col.len() == d, || {
            format!("snapshot of length {} does not match d = {d}", col.len())
        })?;
        if col.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite entry in snapshot".into()));
        }
        for (f, max) in maxima.iter_mut().enumerate() {
            *max = max.max(norm2(&col[f * m..(f + 1) * m]));
        }
        count += 1;
    }
    precondition(count > 0, || "build_normalization needs at least one snapshot")?;
    NormalizationVector::from_field_norms(&maxima, mesh.cell_measures())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_scalar_snapshot() {
        let mesh = Mesh1d::uniform(2, 2.0, false);
        let w = build_normalization([&[3.0, 4.0][..]], 1, &mesh).unwrap();
        assert_eq!(w.n(), &[5.0, 5.0]);
        assert_eq!(w.v(), &[1.0, 1.0]);
        assert_eq!(w.w(), &[5.0, 5.0]);
    }

    #[test]
    fn blocks_follow_field_norms() {
        let mesh = Mesh1d::from_measures(vec![0.5, 2.0], false).unwrap();
        let col = [3.0, 4.0, 0.006, 0.008];
        let w = build_normalization([&col[..]], 2, &mesh).unwrap();
        assert!((w.field_norms()[0] / w.field_norms()[1] - 500.0).abs() < 1e-9);
        assert_eq!(w.w(), &[10.0, 2.5, 0.02, 0.005]);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let mesh = Mesh1d::uniform(2, 1.0, false);
        let col = [1.0, 2.0, 0.0, 0.0];
        let err = build_normalization([&col[..]], 2, &mesh).unwrap_err();
        assert!(matches!(err, Error::DegenerateNormalization { field: 1 }));
        assert!(build_normalization(std::iter::empty::<&[f64]>(), 1, &mesh).is_err());
    }

    #[test]
    fn normalize_round_trips() {
        let mesh = Mesh1d::uniform(3, 3.0, false);
        let w = NormalizationVector::from_field_norms(&[2.0], mesh.cell_measures()).unwrap();
        let x = [1.0, -2.0, 4.0];
        let y = w.normalize(&x).unwrap();
        assert_eq!(y, vec![0.5, -1.0, 2.0]);
        assert_eq!(w.denormalize(&y).unwrap(), x.to_vec());
        assert!(w.normalize(&[1.0]).is_err());
    }
}
