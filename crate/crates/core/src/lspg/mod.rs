//! Online NM-LSPG / LM-LSPG time stepping: one damped least-squares problem on the
//! (hyper-reduced) implicit-Euler residual per step, plus local-manifold switching.

mod chart;
mod local;
mod solver;
mod trajectory;

pub use chart::Chart;
pub use local::{solve_local_trajectory, switch_manifold, LocalManifoldSchedule, LocalTrajectory, SwitchRecord};
pub use solver::{LmSettings, StepDiagnostics};
pub use trajectory::{
    reconstruct, solve_step, solve_trajectory, write_trajectory_csv, FailurePolicy, RomOperator, RomProblem,
    RomTrajectory, UpdateEvent,
};
