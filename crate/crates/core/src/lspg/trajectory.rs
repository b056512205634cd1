use std::io::Write;
use std::time::Instant;

use log::warn;

use crate::error::{precondition, Error, Result};
use crate::fom::{FullState, ModelProblem};
use crate::hyper::{adaptive_update, HyperReducedOperator, MagicPointSet};

use super::chart::Chart;
use super::solver::{LmSettings, StepContext, StepDiagnostics};

/// What to do when a time step exhausts its iterations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Keep the best iterate and continue; the step is recorded as failed.
    AcceptBest,
}

/// Residual operator of the online problem.
#[derive(Clone, Debug)]
pub enum RomOperator {
    /// Residual on the full mesh.
    Dense,
    Hyper(HyperReducedOperator),
}

/// An online NM-LSPG (or LM-LSPG) problem.
#[derive(Clone, Debug)]
pub struct RomProblem<T: crate::Scalar = f64> {
    pub problem: ModelProblem,
    pub chart: Chart<T>,
    pub operator: RomOperator,
    pub dt_rom: f64,
    pub settings: LmSettings,
    pub failure_policy: FailurePolicy,
}

impl<T: crate::Scalar> RomProblem<T> {
    /// Dense operator, `dt_rom = dt_ref`, default solver settings.
    pub fn new(problem: ModelProblem, chart: Chart<T>) -> Self {
        let dt_rom = problem.dt_ref;
        Self {
            problem,
            chart,
            operator: RomOperator::Dense,
            dt_rom,
            settings: LmSettings::default(),
            failure_policy: FailurePolicy::Abort,
        }
    }

    pub fn with_operator(mut self, op: HyperReducedOperator) -> Self {
        self.operator = RomOperator::Hyper(op);
        self
    }

    pub fn with_dt(mut self, dt_rom: f64) -> Self {
        self.dt_rom = dt_rom;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        precondition(self.dt_rom > 0.0 && self.dt_rom.is_finite(), || "dt_rom must be positive")?;
        self.settings.validate()?;
        precondition(self.chart.dim() == self.problem.dim(), || "chart does not match the problem")
    }

    pub fn n_steps(&self) -> usize {
        self.problem.n_steps(self.dt_rom)
    }

    fn hyper(&self) -> Option<&HyperReducedOperator> {
        match &self.operator {
            RomOperator::Dense => None,
            RomOperator::Hyper(op) => Some(op),
        }
    }
}

/// One C-UP magic-point update.
#[derive(Clone, Debug, PartialEq)]
pub struct UpdateEvent {
    /// The update happened before solving this time step.
    pub step: usize,
    pub magic: MagicPointSet,
    pub wall_ms: f64,
}

/// Latent trajectory `{zᵗ}` with per-step solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RomTrajectory {
    pub mu: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub latent: Vec<Vec<f64>>,
    /// Per step (length `N`): Jacobian evaluations, final objective norm, wall time.
    pub iterations: Vec<usize>,
    pub objective_norms: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub updates: Vec<UpdateEvent>,
    /// Steps that ran out of iterations and kept their best iterate.
    pub failed_steps: Vec<usize>,
}

impl RomTrajectory {
    pub fn n_steps(&self) -> usize {
        self.latent.len() - 1
    }

    /// Mean step wall time, skipping the first (warm-up) step.
    pub fn mean_step_ms(&self) -> f64 {
        let w = if self.wall_ms.len() > 1 { &self.wall_ms[1..] } else { &self.wall_ms[..] };
        if w.is_empty() {
            0.0
        } else {
            w.iter().sum::<f64>() / w.len() as f64
        }
    }

    pub fn mean_update_ms(&self) -> f64 {
        if self.updates.is_empty() {
            0.0
        } else {
            self.updates.iter().map(|u| u.wall_ms).sum::<f64>() / self.updates.len() as f64
        }
    }
}

/// One ROM time step from `z_prev` (warm start) with the operator of `rom`.
pub fn solve_step<T: crate::Scalar>(
    rom: &RomProblem<T>,
    mu: f64,
    z_prev: &[f64],
    time_index: usize,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    rom.validate()?;
    precondition(z_prev.iter().all(|v| v.is_finite()), || "previous latent state is not finite")?;
    let ctx = StepContext::new(&rom.problem, &rom.chart, rom.hyper(), mu, rom.dt_rom)?;
    let x_prev = ctx.state(z_prev)?;
    ctx.minimize(z_prev, &x_prev, &rom.settings, time_index)
}

/// Runs the ROM from `z⁰ = ψ(u0)` over `V_μ` at `dt_rom`.
///
/// C-UPn operators re-select their magic points before every step `k` with `k % n == 0`,
/// from the latent states `z^{k−1}` and `z^{k−2}`.
pub fn solve_trajectory<T: crate::Scalar>(rom: &RomProblem<T>, mu: f64, u0: &FullState) -> Result<RomTrajectory> {
    let z0 = rom.chart.encode(u0)?;
    solve_from_latent(rom, mu, z0, 0, rom.n_steps())
}

/// Steps `first+1 ..= last` starting from the latent state at index `first`.
pub(crate) fn solve_from_latent<T: crate::Scalar>(
    rom: &RomProblem<T>,
    mu: f64,
    z0: Vec<f64>,
    first: usize,
    last: usize,
) -> Result<RomTrajectory> {
    rom.validate()?;
    rom.problem.check_param(mu)?;
    let mut op = rom.hyper().cloned();
    let period = op.as_ref().and_then(HyperReducedOperator::update_period);
    let r_h = op.as_ref().map(|o| o.plan().magic().r_h()).unwrap_or(0);
    let n = last - first;
    let mut traj = RomTrajectory {
        mu,
        dt: rom.dt_rom,
        times: vec![first as f64 * rom.dt_rom],
        latent: vec![z0],
        iterations: Vec::with_capacity(n),
        objective_norms: Vec::with_capacity(n),
        wall_ms: Vec::with_capacity(n),
        updates: Vec::new(),
        failed_steps: Vec::new(),
    };

    for k in first + 1..=last {
        let local = k - first;
        if let (Some(period), Some(current), Chart::Nonlinear { model, basis }) = (period, op.as_ref(), &rom.chart) {
            if local % period == 0 && local >= 2 {
                let t0 = Instant::now();
                let forced = current.plan().magic().forced().to_vec();
                let plan = adaptive_update(
                    model,
                    basis,
                    &traj.latent[local - 1],
                    &traj.latent[local - 2],
                    r_h,
                    &forced,
                    &rom.problem.mesh,
                    current.plan(),
                )?;
                let next = current.with_plan(plan)?;
                traj.updates.push(UpdateEvent {
                    step: k,
                    magic: next.plan().magic().clone(),
                    wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                });
                op = Some(next);
            }
        }

        let t0 = Instant::now();
        let ctx = StepContext::new(&rom.problem, &rom.chart, op.as_ref(), mu, rom.dt_rom)?;
        let z_prev = traj.latent.last().expect("initial latent state").clone();
        let x_prev = ctx.state(&z_prev)?;
        let (z, d) = match ctx.minimize(&z_prev, &x_prev, &rom.settings, k) {
            Ok(ok) => ok,
            Err(Error::StepFailed {
                time_index,
                iterations,
                objective,
                best,
            }) if rom.failure_policy == FailurePolicy::AcceptBest && best.iter().all(|v| v.is_finite()) => {
                warn!("rom step {time_index} kept its best iterate (objective {objective:.3e})");
                traj.failed_steps.push(k);
                let d = StepDiagnostics {
                    iterations,
                    objective_norm: objective,
                    history: vec![objective],
                    converged: false,
                };
                (best, d)
            }
            Err(e) => return Err(e),
        };
        traj.wall_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        traj.iterations.push(d.iterations);
        traj.objective_norms.push(d.objective_norm);
        traj.times.push(k as f64 * rom.dt_rom);
        traj.latent.push(z);
    }
    Ok(traj)
}

/// Full states `φ(zᵗ)` at the requested positions of the trajectory.
pub fn reconstruct<T: crate::Scalar>(
    rom: &RomProblem<T>,
    trajectory: &RomTrajectory,
    at: &[usize],
) -> Result<Vec<FullState>> {
    at.iter()
        .map(|&k| {
            let z = trajectory.latent.get(k).ok_or_else(|| {
                Error::Precondition(format!("time index {k} outside trajectory of {} states", trajectory.latent.len()))
            })?;
            rom.chart.decode(z)
        })
        .collect()
}

/// Writes `param,time,latent_0..latent_{r−1},objective_norm,iterations,wall_ms`, one row
/// per time instant (the initial state has zero diagnostics).
pub fn write_trajectory_csv<W: Write>(w: W, trajectories: &[RomTrajectory]) -> Result<()> {
    let r = trajectories.first().map_or(0, |t| t.latent[0].len());
    precondition(trajectories.iter().all(|t| t.latent[0].len() == r), || {
        "trajectories have different latent dimensions"
    })?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["param".to_string(), "time".to_string()];
    header.extend((0..r).map(|i| format!("latent_{i}")));
    header.extend(["objective_norm", "iterations", "wall_ms"].map(String::from));
    out.write_record(&header)?;
    for t in trajectories {
        for (k, z) in t.latent.iter().enumerate() {
            let mut rec = vec![t.mu.to_string(), t.times[k].to_string()];
            rec.extend(z.iter().map(|v| v.to_string()));
            let (obj, it, ms) = if k == 0 {
                (0.0, 0, 0.0)
            } else {
                (t.objective_norms[k - 1], t.iterations[k - 1], t.wall_ms[k - 1])
            };
            rec.push(obj.to_string());
            rec.push(it.to_string());
            rec.push(format!("{ms:.3}"));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}
