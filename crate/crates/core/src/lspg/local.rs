use crate::error::{precondition, Error, Result};
use crate::fom::FullState;
use crate::instrument::{self, Counters};
use crate::linalg::{lu_solve, norm2, DenseMatrix};
use crate::scalar::Scalar;

use super::chart::Chart;
use super::trajectory::{solve_from_latent, RomProblem, RomTrajectory};

/// Local charts valid on overlapping time intervals, with the offline change-of-basis
/// matrices `C_{i,i+1} = U_{i+1}ᵀ U_i` between neighbours.
#[derive(Clone, Debug)]
pub struct LocalManifoldSchedule<T: Scalar = f64> {
    roms: Vec<RomProblem<T>>,
    intervals: Vec<(f64, f64)>,
    switch_times: Vec<f64>,
    change_of_basis: Vec<DenseMatrix<f64>>,
    refine_iterations: usize,
}

impl<T: Scalar> LocalManifoldSchedule<T> {
    /// `switch_times[i]` moves from chart `i` to chart `i+1` and must lie inside the overlap
    /// of their intervals. All charts share the mesh, `W` and `dt_rom`.
    pub fn new(roms: Vec<RomProblem<T>>, intervals: Vec<(f64, f64)>, switch_times: Vec<f64>) -> Result<Self> {
        let n = roms.len();
        let bad = |m: String| Err(Error::Schedule(m));
        if n == 0 || intervals.len() != n || switch_times.len() + 1 != n {
            return bad(format!(
                "{n} charts need {n} intervals and {} switch times",
                n.saturating_sub(1)
            ));
        }
        let first = &roms[0];
        let t_final = first.problem.t_final;
        if intervals[0].0 > 0.0 || intervals[n - 1].1 < t_final {
            return bad(format!("intervals do not cover [0, {t_final}]"));
        }
        let mut change_of_basis = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let (a, b) = (&roms[i], &roms[i + 1]);
            let (ia, ib) = (intervals[i], intervals[i + 1]);
            if ib.0 >= ia.1 {
                return bad(format!("intervals {i} and {} do not overlap", i + 1));
            }
            let ts = switch_times[i];
            if !(ts > ib.0 && ts < ia.1) || (i > 0 && ts <= switch_times[i - 1]) {
                return bad(format!("switch time {ts} outside the overlap ({}, {})", ib.0, ia.1));
            }
            if a.problem.mesh != b.problem.mesh || a.dt_rom != b.dt_rom {
                return bad(format!("charts {i} and {} use different meshes or time steps", i + 1));
            }
            let (Some(ua), Some(ub)) = (a.chart.basis(), b.chart.basis()) else {
                return bad("local manifolds need rSVD-based charts".into());
            };
            if ua.normalization() != ub.normalization() {
                return bad(format!("charts {i} and {} use different normalizations", i + 1));
            }
            change_of_basis.push(ub.u().tr_matmul(ua.u()));
        }
        Ok(Self {
            roms,
            intervals,
            switch_times,
            change_of_basis,
            refine_iterations: DEFAULT_REFINE_ITERATIONS,
        })
    }

    /// Maximum Levenberg–Marquardt iterations that refine the encoder guess at a switch.
    /// Zero keeps the plain encoder map.
    pub fn with_refinement(mut self, iterations: usize) -> Self {
        self.refine_iterations = iterations;
        self
    }

    pub fn refine_iterations(&self) -> usize {
        self.refine_iterations
    }

    pub fn roms(&self) -> &[RomProblem<T>] {
        &self.roms
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    /// `C_{i,i+1}`.
    pub fn change_of_basis(&self, from: usize) -> Option<&DenseMatrix<f64>> {
        self.change_of_basis.get(from)
    }

    /// Time-step index of every switch on the `dt_rom` grid.
    pub fn switch_steps(&self) -> Vec<usize> {
        let dt = self.roms[0].dt_rom;
        self.switch_times.iter().map(|t| (t / dt).round() as usize).collect()
    }
}

const DEFAULT_REFINE_ITERATIONS: usize = 20;

/// Maps a latent state of chart `from` to chart `from + 1` by `z' = ψ̃₂(C₁₂ φ̃₁(z))`, then
/// refines `z'` towards `argmin ‖φ̃₂(z') − C₁₂ φ̃₁(z)‖` in the filtered coordinates. The
/// encoder alone can be far off for inputs slightly off the training manifold.
///
/// With `full_hint` the new latent state is `ψ₂(hint)` instead, which costs `O(d)`.
pub fn switch_manifold<T: Scalar>(
    schedule: &LocalManifoldSchedule<T>,
    from: usize,
    z: &[f64],
    full_hint: Option<&FullState>,
) -> Result<Vec<f64>> {
    let c = schedule
        .change_of_basis(from)
        .ok_or_else(|| Error::Schedule(format!("no change of basis out of chart {from}")))?;
    let (a, b): (&Chart<T>, &Chart<T>) = (&schedule.roms[from].chart, &schedule.roms[from + 1].chart);
    precondition(z.len() == a.latent_dim(), || "latent state does not match the source chart")?;
    if let Some(u) = full_hint {
        return b.encode(u);
    }
    let target = c.matvec(&a.filtered(z)?);
    let guess = b.encode_filtered(&target)?;
    refine_latent(b, &target, guess, schedule.refine_iterations)
}

/// Damped Gauss–Newton on `½‖φ̃(z) − target‖²`. Only accepts decreasing steps, so the
/// result is never worse than `z`.
fn refine_latent<T: Scalar>(chart: &Chart<T>, target: &[f64], mut z: Vec<f64>, iterations: usize) -> Result<Vec<f64>> {
    let residual = |y: &[f64]| y.iter().zip(target).map(|(a, b)| a - b).collect::<Vec<_>>();
    let (y, mut jac) = chart.filtered_with_jacobian(&z)?;
    let mut r = residual(&y);
    let mut cost = norm2(&r);
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        let Some(j) = jac.as_ref() else {
            // Linear charts: the encoder is already the exact minimiser.
            break;
        };
        let mut normal = j.tr_matmul(j);
        let grad = j.tr_matvec(&r);
        if norm2(&grad) <= 1e-14 * (1.0 + cost) {
            break;
        }
        for i in 0..normal.rows() {
            let d = normal[(i, i)];
            normal[(i, i)] = d + lambda * d.max(1e-12);
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let Some(step) = lu_solve(&normal, &rhs) else { break };
        let trial: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + b).collect();
        let (y_t, jac_t) = chart.filtered_with_jacobian(&trial)?;
        let r_t = residual(&y_t);
        let cost_t = norm2(&r_t);
        if cost_t.is_finite() && cost_t < cost {
            let gain = (cost - cost_t) / cost.max(f64::MIN_POSITIVE);
            (z, r, jac, cost) = (trial, r_t, jac_t, cost_t);
            lambda = (lambda / 3.0).max(1e-12);
            if gain < 1e-10 {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e8 {
                break;
            }
        }
    }
    Ok(z)
}

/// Bookkeeping of one chart switch.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchRecord {
    pub step: usize,
    pub from: usize,
    pub z_before: Vec<f64>,
    pub z_after: Vec<f64>,
    /// Objective norm of the last step before and the first step after the switch.
    pub objective_before: f64,
    pub objective_after: f64,
    /// Operation counts of the switch itself.
    pub counters: Counters,
}

/// Trajectory over a local-manifold schedule: one segment per chart.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTrajectory {
    pub segments: Vec<RomTrajectory>,
    pub switches: Vec<SwitchRecord>,
}

impl LocalTrajectory {
    /// `(time index, chart, latent state)` over the whole horizon; the switch instant is
    /// reported in the chart that is active after it.
    pub fn latent_path(&self) -> Vec<(usize, usize, &[f64])> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            let skip = if i + 1 < self.segments.len() { 1 } else { 0 };
            for (k, z) in seg.latent[..seg.latent.len() - skip].iter().enumerate() {
                out.push((start + k, i, z.as_slice()));
            }
            start += seg.latent.len() - 1;
        }
        out
    }

    /// Decoded states over the whole horizon, in time order.
    pub fn states<T: Scalar>(&self, schedule: &LocalManifoldSchedule<T>) -> Result<Vec<FullState>> {
        self.latent_path()
            .into_iter()
            .map(|(_, i, z)| schedule.roms[i].chart.decode(z))
            .collect()
    }
}

/// Runs chart 0 from `ψ₀(u0)` and switches charts at the scheduled instants.
pub fn solve_local_trajectory<T: Scalar>(
    schedule: &LocalManifoldSchedule<T>,
    mu: f64,
    u0: &FullState,
) -> Result<LocalTrajectory> {
    let steps = schedule.switch_steps();
    let n_total = schedule.roms[0].n_steps();
    let mut z = schedule.roms[0].chart.encode(u0)?;
    let mut segments: Vec<RomTrajectory> = Vec::new();
    let mut switches = Vec::new();
    let mut first = 0;
    for (i, rom) in schedule.roms.iter().enumerate() {
        let last = steps.get(i).copied().unwrap_or(n_total).min(n_total);
        precondition(last > first, || format!("chart {i} covers no time steps"))?;
        let seg = solve_from_latent(rom, mu, z.clone(), first, last)?;
        if let Some(prev) = switches.last_mut() {
            let rec: &mut SwitchRecord = prev;
            rec.objective_after = seg.objective_norms[0];
        }
        if i + 1 < schedule.roms.len() {
            let before = seg.latent.last().expect("segment has states").clone();
            let (after, counters) = instrument::measure(|| switch_manifold(schedule, i, &before, None));
            let after = after?;
            switches.push(SwitchRecord {
                step: last,
                from: i,
                z_before: before,
                z_after: after.clone(),
                objective_before: *seg.objective_norms.last().expect("segment has steps"),
                objective_after: f64::NAN,
                counters,
            });
            z = after;
        }
        first = last;
        segments.push(seg);
    }
    Ok(LocalTrajectory { segments, switches })
}
