//! Desk-scale finite-volume full-order models: parametric viscous Burgers and 1D Euler,
//! implicit Euler in time, residuals on the full mesh or on a submesh.

mod mesh;
mod problem;
mod residual;
mod solver;

pub use mesh::{stencil_of, Mesh1d, Stencil};
pub use problem::{
    BoundaryCondition, FullState, InitialCondition, ModelProblem, ProblemKind, GAMMA_DIATOMIC,
};
pub use residual::{
    euler_pressure, godunov_burgers, residual, residual_on_submesh, rusanov_euler, SubmeshIndex,
};
pub use solver::{solve_fom, solve_fom_with, FomTrajectory, NewtonSettings};
