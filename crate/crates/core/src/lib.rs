//! Hyper-reduced nonlinear-manifold least-squares Petrov-Galerkin reduced-order models.
//!
//! The offline stage runs full-order finite-volume solves ([`fom`]), normalises and
//! compresses the snapshots with a randomized SVD ([`snapshot`]), trains an autoencoder
//! on the compressed coordinates ([`manifold`]) and selects magic points for
//! hyper-reduction ([`hyper`]). The online stage ([`lspg`]) advances latent coordinates by
//! minimising the (restricted) full-order residual at every time step.

mod binio;
pub mod error;
pub mod fom;
pub mod hyper;
pub mod instrument;
pub mod linalg;
pub mod lspg;
pub mod manifold;
pub mod scalar;
pub mod snapshot;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision dense matrix used throughout the pipeline.
pub type Matrix = linalg::DenseMatrix<f64>;
/// Single-precision dense matrix.
pub type MatrixF32 = linalg::DenseMatrix<f32>;
/// Double-precision autoencoder chart.
pub type Autoencoder = manifold::AutoencoderModel<f64>;
/// Single-precision autoencoder chart.
pub type AutoencoderF32 = manifold::AutoencoderModel<f32>;
/// Double-precision thin SVD.
pub type Svd = linalg::ThinSvdResult<f64>;
