use log::debug;

use crate::error::{precondition, Error, Result};
use crate::linalg::{lu_solve, norm2, DenseMatrix};

use super::problem::{FullState, ModelProblem};
use super::residual::residual;

/// Settings of the damped Newton solver used by [`solve_fom`].
#[derive(Clone, Debug)]
pub struct NewtonSettings {
    /// Absolute tolerance on the residual 2-norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Keep the residual of every Newton iterate (residual snapshots for hyper-reduction).
    pub record_residuals: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            record_residuals: false,
        }
    }
}

/// Output of a full-order run at `V_μ = {t₀, …, t_N}`.
#[derive(Clone, Debug)]
pub struct FomTrajectory {
    pub mu: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
    pub newton_iterations: Vec<usize>,
    /// Residuals at Newton iterates, with the step index they belong to.
    pub residual_snapshots: Vec<(usize, Vec<f64>)>,
}

/// Runs the full-order model at the reference time step.
pub fn solve_fom(problem: &ModelProblem, mu: f64) -> Result<FomTrajectory> {
    solve_fom_with(problem, mu, problem.dt_ref, &NewtonSettings::default())
}

/// Implicit Euler steps, each solved by damped Newton with a finite-difference Jacobian.
pub fn solve_fom_with(
    problem: &ModelProblem,
    mu: f64,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<FomTrajectory> {
    problem.validate()?;
    problem.check_param(mu)?;
    precondition(dt > 0.0, || "dt must be positive")?;
    let n_steps = problem.n_steps(dt);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut newton_iterations = Vec::with_capacity(n_steps);
    let mut residual_snapshots = Vec::new();
    let u0 = problem.initial_state(mu)?;
    states.push(u0);
    times.push(0.0);

    for step in 1..=n_steps {
        let prev = states.last().expect("initial state").clone();
        let (next, iters) = newton_step(problem, mu, &prev, dt, settings, step, &mut residual_snapshots)?;
        states.push(next);
        times.push(step as f64 * dt);
        newton_iterations.push(iters);
    }
    Ok(FomTrajectory {
        mu,
        dt,
        times,
        states,
        newton_iterations,
        residual_snapshots,
    })
}

fn newton_step(
    problem: &ModelProblem,
    mu: f64,
    prev: &FullState,
    dt: f64,
    settings: &NewtonSettings,
    step: usize,
    snapshots: &mut Vec<(usize, Vec<f64>)>,
) -> Result<(FullState, usize)> {
    let history = std::slice::from_ref(prev);
    let mut u = prev.clone();
    let mut g = residual(problem, mu, &u, history, dt)?;
    let mut gnorm = norm2(&g);

    for it in 0..settings.max_iterations {
        if gnorm < settings.tolerance {
            return Ok((u, it));
        }
        if settings.record_residuals {
            snapshots.push((step, g.clone()));
        }
        let jac = fd_jacobian(problem, mu, &u, history, dt, &g)?;
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = jac.solve(&rhs).ok_or(Error::NewtonFailed {
            step,
            iterations: it,
            residual: gnorm,
        })?;

        // backtracking on the residual norm; nonphysical trial states count as failures
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = FullState {
                values: u.values.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect(),
                n_fields: u.n_fields,
            };
            if let Ok(gt) = residual(problem, mu, &trial, history, dt) {
                let nt = norm2(&gt);
                if nt < gnorm || nt < settings.tolerance {
                    accepted = Some((trial, gt, nt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let step_norm = alpha * norm2(&delta);
        let scale = norm2(&u.values).max(1.0);
        match accepted {
            Some((trial, gt, nt)) => {
                u = trial;
                g = gt;
                gnorm = nt;
            }
            None => {
                // no descent left: accept only if we are at the rounding floor
                if step_norm <= 1e-13 * scale && gnorm < 1e3 * settings.tolerance {
                    debug!("newton step {step}: stagnated at {gnorm:.3e}");
                    return Ok((u, it + 1));
                }
                return Err(Error::NewtonFailed {
                    step,
                    iterations: it + 1,
                    residual: gnorm,
                });
            }
        }
        if step_norm <= 1e-14 * scale && gnorm < 1e3 * settings.tolerance {
            return Ok((u, it + 1));
        }
    }
    if gnorm < settings.tolerance {
        return Ok((u, settings.max_iterations));
    }
    Err(Error::NewtonFailed {
        step,
        iterations: settings.max_iterations,
        residual: gnorm,
    })
}

/// Jacobian storage: banded in cell-interleaved ordering for open meshes, dense otherwise.
enum Jacobian {
    Banded(BandMatrix, usize, usize),
    Dense(DenseMatrix<f64>),
}

impl Jacobian {
    /// Solves `J x = b` with `b` and `x` in the field-blocked dof ordering.
    fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        match self {
            Jacobian::Dense(a) => lu_solve(a, b),
            Jacobian::Banded(band, m, c) => {
                let (m, c) = (*m, *c);
                let mut rhs = vec![0.0; m * c];
                for f in 0..c {
                    for i in 0..m {
                        rhs[i * c + f] = b[f * m + i];
                    }
                }
                let x = band.clone().solve(rhs)?;
                let mut out = vec![0.0; m * c];
                for f in 0..c {
                    for i in 0..m {
                        out[f * m + i] = x[i * c + f];
                    }
                }
                Some(out)
            }
        }
    }
}

/// Number of colours so that no stencil holds two cells of the same colour.
fn n_colors(problem: &ModelProblem) -> usize {
    let m = problem.n_cells();
    (3..=m.max(3))
        .find(|&k| {
            (0..m).all(|i| {
                let (l, r) = problem.mesh.neighbors(i);
                let mut colors: Vec<usize> = [l, Some(i), r].into_iter().flatten().map(|c| c % k).collect();
                let n = colors.len();
                colors.sort_unstable();
                colors.dedup();
                colors.len() == n
            })
        })
        .unwrap_or(m)
}

/// Finite-difference Jacobian using a distance-2 colouring of the cells.
fn fd_jacobian(
    problem: &ModelProblem,
    mu: f64,
    u: &FullState,
    history: &[FullState],
    dt: f64,
    g0: &[f64],
) -> Result<Jacobian> {
    let m = problem.n_cells();
    let c = problem.n_fields();
    let periodic = problem.mesh.is_periodic();
    let bw = 2 * c - 1;
    let mut jac = if periodic {
        Jacobian::Dense(DenseMatrix::zeros(m * c, m * c))
    } else {
        Jacobian::Banded(BandMatrix::new(m * c, bw, bw), m, c)
    };
    let k = n_colors(problem);
    let eps = f64::EPSILON.sqrt();

    for g in 0..c {
        for color in 0..k {
            let cells: Vec<usize> = (color..m).step_by(k).collect();
            if cells.is_empty() {
                continue;
            }
            let mut pert = u.clone();
            let mut steps = vec![0.0; m];
            for &j in &cells {
                let v = u.values[g * m + j];
                let h = eps * v.abs().max(1.0);
                pert.values[g * m + j] = v + h;
                steps[j] = pert.values[g * m + j] - v;
            }
            let gp = match residual(problem, mu, &pert, history, dt) {
                Ok(r) => r,
                Err(Error::State(_)) => {
                    // nonphysical forward perturbation: fall back to a backward difference
                    for &j in &cells {
                        let v = u.values[g * m + j];
                        pert.values[g * m + j] = v - steps[j];
                    }
                    for &j in &cells {
                        steps[j] = -steps[j];
                    }
                    residual(problem, mu, &pert, history, dt)?
                }
                Err(e) => return Err(e),
            };
            for &j in &cells {
                let (l, r) = problem.mesh.neighbors(j);
                for i in [l, Some(j), r].into_iter().flatten() {
                    for f in 0..c {
                        let d = (gp[f * m + i] - g0[f * m + i]) / steps[j];
                        if d == 0.0 {
                            continue;
                        }
                        match &mut jac {
                            Jacobian::Dense(a) => a[(f * m + i, g * m + j)] = d,
                            Jacobian::Banded(b, _, _) => b.set(i * c + f, j * c + g, d),
                        }
                    }
                }
            }
        }
    }
    Ok(jac)
}

/// Banded matrix with room for the fill-in of partial pivoting.
#[derive(Clone, Debug)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    /// Upper bandwidth including pivoting fill (`ku + kl`).
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub(crate) fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ku = ku + kl;
        let width = kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        let p = self.pos(i, j);
        self.data[p] = v;
    }

    /// Gaussian elimination with partial pivoting; consumes the matrix.
    pub(crate) fn solve(mut self, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.n;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.ku).min(n - 1);
            let (p, pv) = (k..=last_row)
                .map(|i| (i, self.get(i, k).abs()))
                .fold((k, -1.0), |a, x| if x.1 > a.1 { x } else { a });
            if pv <= 0.0 {
                return None;
            }
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let c = self.get(p, j);
                    self.set(k, j, c);
                    self.set(p, j, a);
                }
                b.swap(k, p);
            }
            let piv = self.get(k, k);
            for i in k + 1..=last_row {
                let l = self.get(i, k) / piv;
                if l == 0.0 {
                    continue;
                }
                self.set(i, k, 0.0);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - l * self.get(k, j);
                    self.set(i, j, v);
                }
                b[i] -= l * b[k];
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + self.ku).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=last_col {
                s -= self.get(i, j) * b[j];
            }
            b[i] = s / self.get(i, i);
        }
        Some(b)
    }
}
