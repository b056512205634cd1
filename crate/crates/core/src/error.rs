use thiserror::Error;

/// Errors raised anywhere in the offline/online pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("nonphysical state: {0}")]
    State(String),

    #[error("nnls did not converge after {iterations} iterations (residual {residual_norm:.3e})")]
    NnlsNotConverged {
        iterations: usize,
        weights: Vec<f64>,
        residual_norm: f64,
    },

    #[error("newton failed at time step {step} after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("rom step {time_index} did not converge in {iterations} iterations (objective {objective:.3e})")]
    StepFailed {
        time_index: usize,
        iterations: usize,
        objective: f64,
        best: Vec<f64>,
    },

    #[error("field {field} is identically zero across all snapshots")]
    DegenerateNormalization { field: usize },

    #[error("gappy matrix has rank {rank} < {needed}; increase r_h")]
    SingularGappy { rank: usize, needed: usize },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input or IO).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NnlsNotConverged { .. }
                | Error::NewtonFailed { .. }
                | Error::TrainingDiverged { .. }
                | Error::StepFailed { .. }
                | Error::SingularGappy { .. }
                | Error::State(_)
                | Error::DegenerateNormalization { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Format(format!("{other:?}")),
            }
        } else {
            Error::Format(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition<S: Into<String>>(ok: bool, msg: impl FnOnce() -> S) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg().into()))
    }
}
