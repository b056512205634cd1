//! Magic-point selection (gappy DEIM, S-OPT, ECSW, decoder-sensitivity adaptive) and the
//! hyper-reduced residual operators built on them.

mod adaptive;
mod io;
mod operator;
mod points;
mod residuals;
mod selection;

pub use adaptive::{adaptive_update, sensitivity_scores};
pub use io::{read_magic_csv, write_magic_csv, MagicPointRow};
pub use operator::{
    apply_operator, build_operator, decode_on_submesh, forced_boundary, HrBasis, HrVariant, HyperReducedOperator,
    OperatorInputs, Sampling, SelectionBasis, DEFAULT_ECSW_TOLERANCE, DEFAULT_UPDATE_PERIOD,
};
pub use points::{MagicPointSet, SubmeshPlan};
pub use residuals::ResidualSnapshotSet;
pub use selection::{
    compute_ecsw_weights, gappy_residual, select_deim_greedy, select_sopt_greedy, sopt_score, EcswWeights,
};
