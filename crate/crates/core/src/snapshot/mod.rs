//! Normalisation, snapshot matrices, rSVD filtering maps and reconstruction errors.

mod basis;
mod io;
mod metrics;
mod normalization;
mod set;

pub use basis::ReducedBasis;
pub use io::{
    load_basis, load_snapshots, read_basis, read_error_csv, read_snapshots, save_basis, save_snapshots,
    write_basis, write_error_csv, write_snapshots, ErrorRow, BASIS_MAGIC, SNAPSHOT_MAGIC,
};
pub use metrics::{column_error, reconstruction_errors, ColumnError, ErrorSummary};
pub use normalization::{build_normalization, NormalizationVector};
pub use set::{ColumnMeta, RawSnapshots, SnapshotRole, SnapshotSet};
