//! Dense linear-algebra kernels: matrices, QR, thin SVD, randomized SVD,
//! pseudo-inverse and non-negative least squares.

mod decomp;
mod matrix;
mod nnls;
mod rsvd;

pub use decomp::{
    default_rcond, householder_qr, least_squares, lu_solve, numerical_rank, pseudo_inverse,
    qr_least_squares, thin_svd, ThinQr, ThinSvdResult,
};
pub use matrix::{dot, norm2, DenseMatrix};
pub use nnls::{nnls, NnlsResult};
pub use rsvd::{gaussian_sketch, randomized_svd, sketch_dimension, DEFAULT_OVERSAMPLING};
