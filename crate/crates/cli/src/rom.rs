use std::time::Instant;

use hrom_core::fom::ModelProblem;
use hrom_core::hyper::{build_operator, write_magic_csv, HrVariant, HyperReducedOperator, OperatorInputs, SelectionBasis};
use hrom_core::lspg::{reconstruct, solve_trajectory, write_trajectory_csv, Chart, FailurePolicy, RomProblem, RomTrajectory};
use hrom_core::manifold::reconstruction_error_nonlinear;
use hrom_core::snapshot::{write_error_csv, ColumnMeta, ErrorRow, ErrorSummary, RawSnapshots, SnapshotRole, SnapshotSet};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{core_io, create, file_label, load_role, subsample, write_csv, Layout};
use crate::build::{load_offline, Offline};
use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;

/// Label of the autoencoder reconstruction baseline in the metrics tables.
pub const AE_REC: &str = "AE-REC";

/// Row of `rom/metrics.csv`; `param` is `all` for the aggregate over test parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub param: String,
    pub field: String,
    pub mean_rel_l2: f64,
    pub max_rel_l2: f64,
}

pub const METRICS_HEADER: [&str; 5] = ["method", "param", "field", "mean_rel_l2", "max_rel_l2"];

/// Row of `rom/runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: String,
    pub param: f64,
    pub status: String,
    pub failed_steps: usize,
    pub n_updates: usize,
    pub message: String,
}

/// Row of `rom/timing.csv`. Step times exclude the first (warm-up) step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub param: String,
    pub mean_step_ms: f64,
    pub p95_step_ms: f64,
    /// Mean step time with the submesh updates spread over the steps.
    pub mean_step_with_updates_ms: f64,
    pub mean_update_ms: f64,
    pub total_s: f64,
}

pub const TIMING_HEADER: [&str; 7] = [
    "method",
    "param",
    "mean_step_ms",
    "p95_step_ms",
    "mean_step_with_updates_ms",
    "mean_update_ms",
    "total_s",
];

/// The hyper-reduction operator of `variant` for the offline artifacts.
pub fn operator_for(
    cfg: &ExperimentConfig,
    problem: &ModelProblem,
    offline: &Offline,
    variant: HrVariant,
) -> Result<HyperReducedOperator, CliError> {
    let needs_residual = cfg.selection_basis() == SelectionBasis::Residual
        || matches!(
            variant,
            HrVariant::Static {
                basis: hrom_core::hyper::HrBasis::Residual,
                ..
            }
        );
    if needs_residual && offline.residual_basis.is_none() {
        return Err(CliError::Config(format!(
            "{variant} needs a residual basis; rerun `fom` and `build` with this method configured"
        )));
    }
    let inputs = OperatorInputs {
        state_basis: &offline.basis,
        residual_basis: offline.residual_basis.as_ref(),
        r_h: cfg.rom.r_h,
        selection_basis: cfg.selection_basis(),
        ecsw_tolerance: cfg.rom.ecsw_tolerance,
    };
    build_operator(variant, &inputs, problem).map_err(CliError::stage("point selection"))
}

struct Run {
    mu: f64,
    outcome: Result<(RomTrajectory, ErrorSummary, f64), String>,
}

/// Online stage: every configured method on every test parameter, compared against the
/// stored reference trajectories.
pub fn run(cfg: &ExperimentConfig, layout: &Layout) -> Result<(), CliError> {
    let problem = cfg.model_problem()?;
    let offline = load_offline(layout)?;
    let mult = cfg.rom.dt_multiplier;
    let references: Vec<RawSnapshots> = load_role(layout, "test")?
        .into_iter()
        .map(|(_, s)| subsample(&s, mult))
        .collect::<Result<_, _>>()?;
    let dir = layout.rom_dir();
    let mut metrics = Vec::new();
    let mut runs = Vec::new();
    let mut timing = Vec::new();

    // autoencoder reconstruction baseline at the ROM time instants
    let baseline: Vec<ErrorSummary> = references
        .iter()
        .map(|raw| {
            let set = SnapshotSet::from_raw(raw, offline.basis.normalization(), SnapshotRole::Test)?;
            reconstruction_error_nonlinear(&offline.model, &offline.basis, &set)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::stage("baseline"))?;
    write_errors(&dir, AE_REC, &baseline)?;
    metrics.extend(metric_rows(AE_REC, &cfg.params.test, &baseline));

    for method in cfg.methods()? {
        let label = method.label();
        let rom = rom_problem(cfg, &problem, &offline, method)?;
        info!("rom {label}: {} test parameters", references.len());
        let results: Vec<Run> = references
            .par_iter()
            .zip(&cfg.params.test)
            .map(|(reference, &mu)| Run {
                mu,
                outcome: run_one(&rom, mu, reference, mult),
            })
            .collect();

        let mut ok_summaries = Vec::new();
        let mut ok_params = Vec::new();
        let mut trajectories = Vec::new();
        let mut step_ms = Vec::new();
        let (mut update_ms, mut n_updates, mut total_s) = (Vec::new(), 0usize, 0.0);
        for run in results {
            match run.outcome {
                Ok((traj, summary, secs)) => {
                    runs.push(RunRow {
                        method: label.clone(),
                        param: run.mu,
                        status: if traj.failed_steps.is_empty() { "ok" } else { "accepted_best" }.into(),
                        failed_steps: traj.failed_steps.len(),
                        n_updates: traj.updates.len(),
                        message: String::new(),
                    });
                    let steps: Vec<f64> = traj.wall_ms.iter().skip(1).copied().collect();
                    let updates: Vec<f64> = traj.updates.iter().map(|u| u.wall_ms).collect();
                    timing.push(timing_row(&label, &run.mu.to_string(), &steps, &updates, secs));
                    step_ms.extend(steps);
                    update_ms.extend(updates);
                    n_updates += traj.updates.len();
                    total_s += secs;
                    if !traj.updates.is_empty() {
                        let rows: Vec<_> = traj.updates.iter().flat_map(|u| u.magic.rows(u.step)).collect();
                        let path = dir.join("points").join(format!("{}_{}.csv", file_label(&label), run.mu));
                        write_magic_csv(create(&path)?, &rows).map_err(|e| core_io(&path, e))?;
                    }
                    ok_summaries.push(summary);
                    ok_params.push(run.mu);
                    trajectories.push(traj);
                }
                Err(message) => {
                    warn!("rom {label} at param {} failed: {message}", run.mu);
                    runs.push(RunRow {
                        method: label.clone(),
                        param: run.mu,
                        status: "failed".into(),
                        failed_steps: 0,
                        n_updates: 0,
                        message,
                    });
                }
            }
        }
        debug_assert_eq!(update_ms.len(), n_updates);
        timing.push(timing_row(&label, "all", &step_ms, &update_ms, total_s));
        write_errors(&dir, &label, &ok_summaries)?;
        metrics.extend(metric_rows(&label, &ok_params, &ok_summaries));
        let path = dir.join("trajectories").join(format!("{}.csv", file_label(&label)));
        write_trajectory_csv(create(&path)?, &trajectories).map_err(|e| core_io(&path, e))?;
    }

    write_csv(&dir.join("metrics.csv"), &metrics)?;
    write_csv(&dir.join("runs.csv"), &runs)?;
    write_csv(&dir.join("timing.csv"), &timing)?;
    let failed: Vec<&RunRow> = runs.iter().filter(|r| r.status == "failed").collect();
    if let Some(first) = failed.first() {
        return Err(CliError::Numeric(format!(
            "{} ROM run(s) failed, first {} at param {}: {}",
            failed.len(),
            first.method,
            first.param,
            first.message
        )));
    }
    Ok(())
}

fn rom_problem(cfg: &ExperimentConfig, problem: &ModelProblem, offline: &Offline, method: Method) -> Result<RomProblem, CliError> {
    let chart = match method {
        Method::Identity => Chart::Identity {
            n_fields: problem.n_fields(),
            n_cells: problem.n_cells(),
        },
        _ => Chart::nonlinear(offline.model.clone(), offline.basis.clone()).map_err(CliError::stage("rom setup"))?,
    };
    let mut rom = RomProblem::new(problem.clone(), chart).with_dt(cfg.rom.dt_multiplier as f64 * problem.dt_ref);
    if let Method::Hyper(variant) = method {
        rom = rom.with_operator(operator_for(cfg, problem, offline, variant)?);
    }
    rom.settings = cfg.lm_settings();
    if cfg.rom.accept_best {
        rom.failure_policy = FailurePolicy::AcceptBest;
    }
    rom.validate().map_err(CliError::stage("rom setup"))?;
    Ok(rom)
}

/// One ROM trajectory with its errors against `reference` (every `mult`-th FOM state).
fn run_one(rom: &RomProblem, mu: f64, reference: &RawSnapshots, mult: usize) -> Result<(RomTrajectory, ErrorSummary, f64), String> {
    let t0 = Instant::now();
    let traj = solve_trajectory(rom, mu, &reference.state(0)).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    if traj.n_steps() + 1 != reference.n_cols() {
        return Err(format!(
            "reference has {} states but the ROM made {} steps (dt multiplier {mult})",
            reference.n_cols(),
            traj.n_steps()
        ));
    }
    let states = reconstruct(rom, &traj, &(0..=traj.n_steps()).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let meta: Vec<ColumnMeta> = reference.meta.clone();
    let summary = ErrorSummary::compare(
        &meta,
        reference.columns(),
        states.iter().map(|s| s.values.as_slice()),
        reference.n_fields,
    )
    .map_err(|e| e.to_string())?;
    Ok((traj, summary, secs))
}

fn write_errors(dir: &std::path::Path, label: &str, summaries: &[ErrorSummary]) -> Result<(), CliError> {
    let rows: Vec<ErrorRow> = summaries.iter().flat_map(ErrorSummary::rows).collect();
    let path = dir.join("errors").join(format!("{}.csv", file_label(label)));
    write_error_csv(create(&path)?, &rows).map_err(|e| core_io(&path, e))
}

/// Mean and max per parameter and field, then over all parameters.
fn metric_rows(label: &str, params: &[f64], summaries: &[ErrorSummary]) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<MetricRow>, param: String, s: &ErrorSummary| {
        rows.push(MetricRow {
            method: label.to_string(),
            param: param.clone(),
            field: "all".into(),
            mean_rel_l2: s.mean,
            max_rel_l2: s.max,
        });
        for (f, (mean, max)) in s.mean_per_field.iter().zip(&s.max_per_field).enumerate() {
            rows.push(MetricRow {
                method: label.to_string(),
                param: param.clone(),
                field: f.to_string(),
                mean_rel_l2: *mean,
                max_rel_l2: *max,
            });
        }
    };
    for (mu, s) in params.iter().zip(summaries) {
        push(&mut rows, mu.to_string(), s);
    }
    if !summaries.is_empty() {
        let all = ErrorSummary::from_columns(summaries.iter().flat_map(|s| s.columns.iter().cloned()).collect());
        push(&mut rows, "all".into(), &all);
    }
    rows
}

fn timing_row(label: &str, param: &str, steps: &[f64], updates: &[f64], total_s: f64) -> TimingRow {
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let mut sorted = steps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p95 = if sorted.is_empty() {
        0.0
    } else {
        sorted[((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1]
    };
    let amortised = if steps.is_empty() {
        0.0
    } else {
        (steps.iter().sum::<f64>() + updates.iter().sum::<f64>()) / steps.len() as f64
    };
    TimingRow {
        method: label.to_string(),
        param: param.to_string(),
        mean_step_ms: mean(steps),
        p95_step_ms: p95,
        mean_step_with_updates_ms: amortised,
        mean_update_ms: mean(updates),
        total_s,
    }
}
