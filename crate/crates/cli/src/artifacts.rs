//! On-disk layout of an experiment directory and small file helpers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hrom_core::linalg::DenseMatrix;
use hrom_core::snapshot::{load_snapshots, save_snapshots, RawSnapshots};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn fom_dir(&self) -> PathBuf {
        self.root.join("fom")
    }

    pub fn manifest(&self) -> PathBuf {
        self.fom_dir().join("manifest.csv")
    }

    pub fn build_dir(&self) -> PathBuf {
        self.root.join("build")
    }

    pub fn basis(&self) -> PathBuf {
        self.build_dir().join("basis.bin")
    }

    pub fn residual_basis(&self) -> PathBuf {
        self.build_dir().join("residual_basis.bin")
    }

    pub fn model(&self) -> PathBuf {
        self.build_dir().join("model.bin")
    }

    pub fn points_dir(&self) -> PathBuf {
        self.build_dir().join("points")
    }

    pub fn rom_dir(&self) -> PathBuf {
        self.root.join("rom")
    }

    pub fn error_record(&self) -> PathBuf {
        self.root.join("error.json")
    }
}

/// Replaces characters that are awkward in file names (`C-UP50` stays as is).
pub fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Serialises `rows` as CSV (header taken from the row type).
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a CSV file, requiring exactly the `expected` header.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, expected: &[&str]) -> Result<Vec<T>, CliError> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::artifact(
            path,
            format!("header {:?} does not match {:?}", header.iter().collect::<Vec<_>>(), expected),
        ));
    }
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::artifact(path, format!("{other:?}")),
    }
}

pub fn save_snaps(path: &Path, snaps: &RawSnapshots) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    save_snapshots(path, snaps).map_err(|e| core_io(path, e))
}

pub fn load_snaps(path: &Path) -> Result<RawSnapshots, CliError> {
    load_snapshots(path).map_err(|e| core_io(path, e))
}

/// Maps a core error raised while reading or writing `path`.
pub fn core_io(path: &Path, e: hrom_core::Error) -> CliError {
    match e {
        hrom_core::Error::Io(io) => CliError::io(path, io),
        other => CliError::artifact(path, other.to_string()),
    }
}

/// Keeps every `stride`-th column of each trajectory block.
pub fn subsample(snaps: &RawSnapshots, stride: usize) -> Result<RawSnapshots, CliError> {
    let keep: Vec<usize> = (0..snaps.n_cols()).filter(|j| j % stride == 0).collect();
    RawSnapshots::new(
        snaps.matrix.select_cols(&keep),
        keep.iter().map(|&j| snaps.meta[j]).collect(),
        snaps.n_fields,
        snaps.n_cells,
    )
    .map_err(CliError::stage("snapshots"))
}

/// Concatenates snapshot blocks in order.
pub fn concat(blocks: &[RawSnapshots]) -> Result<RawSnapshots, CliError> {
    let first = blocks
        .first()
        .ok_or_else(|| CliError::Config("no snapshot files to combine".into()))?;
    let columns: Vec<Vec<f64>> = blocks.iter().flat_map(|b| b.columns().map(<[f64]>::to_vec)).collect();
    let meta = blocks.iter().flat_map(|b| b.meta.iter().copied()).collect();
    let matrix = DenseMatrix::from_columns(first.dim(), &columns).map_err(CliError::stage("snapshots"))?;
    RawSnapshots::new(matrix, meta, first.n_fields, first.n_cells).map_err(CliError::stage("snapshots"))
}

/// Row of `fom/manifest.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub role: String,
    pub index: usize,
    pub param: f64,
    pub file: String,
    pub residual_file: String,
    pub n_snapshots: usize,
    pub max_newton_iterations: usize,
    pub status: String,
    pub message: String,
}

pub const MANIFEST_HEADER: [&str; 9] = [
    "role",
    "index",
    "param",
    "file",
    "residual_file",
    "n_snapshots",
    "max_newton_iterations",
    "status",
    "message",
];

pub fn read_manifest(layout: &Layout) -> Result<Vec<ManifestRow>, CliError> {
    read_csv(&layout.manifest(), &MANIFEST_HEADER)
}

/// Snapshot blocks of one role in manifest order; fails if any run of that role failed.
pub fn load_role(layout: &Layout, role: &str) -> Result<Vec<(ManifestRow, RawSnapshots)>, CliError> {
    let rows: Vec<ManifestRow> = read_manifest(layout)?.into_iter().filter(|r| r.role == role).collect();
    if rows.is_empty() {
        return Err(CliError::artifact(&layout.manifest(), format!("no {role} runs recorded")));
    }
    rows.into_iter()
        .map(|row| {
            if row.status != "ok" {
                return Err(CliError::artifact(
                    &layout.manifest(),
                    format!("{role} run {} (param {}) failed: {}", row.index, row.param, row.message),
                ));
            }
            let snaps = load_snaps(&layout.fom_dir().join(&row.file))?;
            Ok((row, snaps))
        })
        .collect()
}
