//! Autoencoder charts on filtered rSVD coordinates.

mod chart;
mod io;
mod model;
mod train;

pub use chart::{decode, encode, reconstruction_error_nonlinear, round_trip};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use model::{Activation, Architecture, AutoencoderModel, Layer};
pub use train::{train_autoencoder, EpochLoss, TrainingConfig, TrainingOutcome};
