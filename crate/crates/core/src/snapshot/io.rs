use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{expect_eof, read_count, read_f64s, read_magic, write_f64s, write_u64, MAX_ELEMENTS};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::basis::ReducedBasis;
use super::metrics::ErrorSummary;
use super::normalization::NormalizationVector;
use super::set::{ColumnMeta, RawSnapshots};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"HROMSNAP";
pub const BASIS_MAGIC: &[u8; 8] = b"HROMBAS1";

/// Writes `HROMSNAP`, `d`, `n`, `c`, `M`, the column-major values and `(μ, t)` records.
pub fn write_snapshots<W: Write>(w: &mut W, snaps: &RawSnapshots) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    write_u64(w, snaps.dim() as u64)?;
    write_u64(w, snaps.n_cols() as u64)?;
    write_u64(w, snaps.n_fields as u64)?;
    write_u64(w, snaps.n_cells as u64)?;
    write_f64s(w, snaps.matrix.data())?;
    let meta: Vec<f64> = snaps.meta.iter().flat_map(|m| [m.mu, m.time]).collect();
    write_f64s(w, &meta)?;
    Ok(())
}

pub fn read_snapshots<R: Read>(r: &mut R) -> Result<RawSnapshots> {
    read_magic(r, SNAPSHOT_MAGIC)?;
    let d = read_count(r, "d", MAX_ELEMENTS)?;
    let n = read_count(r, "n", MAX_ELEMENTS)?;
    let c = read_count(r, "c", MAX_ELEMENTS)?;
    let m = read_count(r, "M", MAX_ELEMENTS)?;
    if c == 0 || c.checked_mul(m) != Some(d) {
        return Err(Error::Format(format!("header d = {d} is not c·M = {c}·{m}")));
    }
    let total = d
        .checked_mul(n)
        .filter(|&t| t as u64 <= MAX_ELEMENTS)
        .ok_or_else(|| Error::Format("snapshot matrix too large".into()))?;
    let values = read_f64s(r, total)?;
    let meta_flat = read_f64s(r, 2 * n)?;
    expect_eof(r)?;
    let meta = meta_flat
        .chunks_exact(2)
        .map(|p| ColumnMeta { mu: p[0], time: p[1] })
        .collect();
    let matrix = DenseMatrix::from_col_major(d, n, values).map_err(|e| Error::Format(e.to_string()))?;
    RawSnapshots::new(matrix, meta, c, m).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_snapshots(path: &Path, snaps: &RawSnapshots) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshots(&mut w, snaps)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshots(path: &Path) -> Result<RawSnapshots> {
    read_snapshots(&mut BufReader::new(File::open(path)?))
}

/// Basis file: `HROMBAS1`, `c`, `M`, `r`, field norms, cell measures, singular values, `U`
/// column-major.
pub fn write_basis<W: Write>(w: &mut W, basis: &ReducedBasis) -> Result<()> {
    let norm = basis.normalization();
    w.write_all(BASIS_MAGIC)?;
    write_u64(w, norm.n_fields() as u64)?;
    write_u64(w, norm.n_cells() as u64)?;
    write_u64(w, basis.r_rsvd() as u64)?;
    write_f64s(w, norm.field_norms())?;
    write_f64s(w, norm.cell_measures())?;
    write_f64s(w, basis.singular_values())?;
    write_f64s(w, basis.u().data())?;
    Ok(())
}

pub fn read_basis<R: Read>(r: &mut R) -> Result<ReducedBasis> {
    read_magic(r, BASIS_MAGIC)?;
    let c = read_count(r, "c", 64)?;
    let m = read_count(r, "M", MAX_ELEMENTS)?;
    let k = read_count(r, "r", MAX_ELEMENTS)?;
    let field_norms = read_f64s(r, c)?;
    let measures = read_f64s(r, m)?;
    let sv = read_f64s(r, k)?;
    let d = c * m;
    let total = d
        .checked_mul(k)
        .filter(|&t| t as u64 <= MAX_ELEMENTS)
        .ok_or_else(|| Error::Format("basis too large".into()))?;
    let data = read_f64s(r, total)?;
    expect_eof(r)?;
    let norm = NormalizationVector::from_field_norms(&field_norms, &measures)?;
    let u = DenseMatrix::from_col_major(d, k, data)?;
    ReducedBasis::new(u, norm, sv)
}

pub fn save_basis(path: &Path, basis: &ReducedBasis) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_basis(&mut w, basis)?;
    w.flush()?;
    Ok(())
}

pub fn load_basis(path: &Path) -> Result<ReducedBasis> {
    read_basis(&mut BufReader::new(File::open(path)?))
}

/// One line of the error CSV `param,time,field,rel_l2_err`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub param: f64,
    pub time: f64,
    /// `all` for the monolithic error, otherwise the field index.
    pub field: String,
    pub rel_l2_err: f64,
}

impl ErrorSummary {
    /// Long-format rows: the monolithic error, then one row per field; undefined entries
    /// (zero reference norm) are omitted.
    pub fn rows(&self) -> Vec<ErrorRow> {
        let mut rows = Vec::new();
        for c in &self.columns {
            if let Some(e) = c.total {
                rows.push(ErrorRow {
                    param: c.mu,
                    time: c.time,
                    field: "all".into(),
                    rel_l2_err: e,
                });
            }
            for (f, e) in c.per_field.iter().enumerate() {
                if let Some(e) = e {
                    rows.push(ErrorRow {
                        param: c.mu,
                        time: c.time,
                        field: f.to_string(),
                        rel_l2_err: *e,
                    });
                }
            }
        }
        rows
    }
}

pub fn write_error_csv<W: Write>(w: W, rows: &[ErrorRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(["param", "time", "field", "rel_l2_err"])?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_error_csv<R: Read>(r: R) -> Result<Vec<ErrorRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["param", "time", "field", "rel_l2_err"] {
        return Err(Error::Format(format!("unexpected error CSV header {headers:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
