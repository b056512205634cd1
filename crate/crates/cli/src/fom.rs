use hrom_core::fom::{solve_fom_with, FomTrajectory, ModelProblem, NewtonSettings};
use hrom_core::linalg::DenseMatrix;
use hrom_core::snapshot::{ColumnMeta, RawSnapshots};
use log::{info, warn};
use rayon::prelude::*;

use crate::artifacts::{ensure_dir, save_snaps, write_csv, Layout, ManifestRow};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Runs the full-order model for every train and test parameter and writes the snapshot
/// files plus `fom/manifest.csv`.
pub fn run(cfg: &ExperimentConfig, layout: &Layout) -> Result<(), CliError> {
    let problem = cfg.model_problem()?;
    let residuals = cfg.needs_residuals()?;
    ensure_dir(&layout.fom_dir())?;
    let jobs: Vec<(&str, usize, f64)> = cfg
        .params
        .train
        .iter()
        .enumerate()
        .map(|(i, &mu)| ("train", i, mu))
        .chain(cfg.params.test.iter().enumerate().map(|(i, &mu)| ("test", i, mu)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(role, index, mu)| run_one(cfg, &problem, layout, role, index, mu, residuals && role == "train"))
        .collect::<Result<Vec<_>, CliError>>()?;
    write_csv(&layout.manifest(), &rows)?;
    let failed: Vec<&ManifestRow> = rows.iter().filter(|r| r.role == "train" && r.status != "ok").collect();
    if let Some(r) = failed.first() {
        return Err(CliError::Numeric(format!(
            "{} training run(s) failed, first at param {}: {}",
            failed.len(),
            r.param,
            r.message
        )));
    }
    Ok(())
}

fn run_one(
    cfg: &ExperimentConfig,
    problem: &ModelProblem,
    layout: &Layout,
    role: &str,
    index: usize,
    mu: f64,
    residuals: bool,
) -> Result<ManifestRow, CliError> {
    let settings = NewtonSettings {
        record_residuals: residuals,
        ..NewtonSettings::default()
    };
    let file = format!("{role}_{index}.snap");
    let mut row = ManifestRow {
        role: role.to_string(),
        index,
        param: mu,
        file: file.clone(),
        residual_file: String::new(),
        n_snapshots: 0,
        max_newton_iterations: 0,
        status: "ok".into(),
        message: String::new(),
    };
    let traj = match solve_fom_with(problem, mu, problem.dt_ref, &settings) {
        Ok(t) => t,
        Err(e) if e.is_numeric() => {
            warn!("fom {role} run at param {mu} failed: {e}");
            row.status = "failed".into();
            row.message = e.to_string();
            return Ok(row);
        }
        Err(e) => return Err(CliError::stage("fom")(e)),
    };
    info!("fom {role} param {mu}: {} steps", traj.states.len() - 1);
    let snaps = RawSnapshots::from_trajectory(&traj, 1).map_err(CliError::stage("fom"))?;
    save_snaps(&layout.fom_dir().join(&file), &snaps)?;
    row.n_snapshots = snaps.n_cols();
    row.max_newton_iterations = traj.newton_iterations.iter().copied().max().unwrap_or(0);
    if residuals {
        let name = format!("{role}_{index}.residuals.snap");
        save_snaps(&layout.fom_dir().join(&name), &residual_block(&traj, cfg.snapshots.residual_stride)?)?;
        row.residual_file = name;
    }
    Ok(row)
}

/// Every `stride`-th recorded Newton residual, tagged with the time of its step.
fn residual_block(traj: &FomTrajectory, stride: usize) -> Result<RawSnapshots, CliError> {
    let first = &traj.states[0];
    let (meta, columns): (Vec<_>, Vec<_>) = traj
        .residual_snapshots
        .iter()
        .step_by(stride)
        .map(|(step, g)| {
            let meta = ColumnMeta {
                mu: traj.mu,
                time: *step as f64 * traj.dt,
            };
            (meta, g.clone())
        })
        .unzip();
    let matrix = DenseMatrix::from_columns(first.values.len(), &columns).map_err(CliError::stage("fom"))?;
    RawSnapshots::new(matrix, meta, first.n_fields, first.n_cells()).map_err(CliError::stage("fom"))
}
