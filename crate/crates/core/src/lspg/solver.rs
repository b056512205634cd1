use crate::error::{precondition, Error, Result};
use crate::fom::{residual, residual_on_submesh, FullState, ModelProblem};
use crate::hyper::HyperReducedOperator;
use crate::instrument;
use crate::linalg::{lu_solve, norm2, DenseMatrix};
use crate::scalar::Scalar;

use super::chart::Chart;

/// Levenberg-Marquardt settings of one ROM time step.
#[derive(Clone, Debug, PartialEq)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Converged when the objective norm drops below this.
    pub abs_tol: f64,
    /// Converged when an accepted step reduces the objective norm by less than this fraction.
    pub rel_tol: f64,
    pub initial_damping: f64,
    /// Multiplies the damping after a rejected trial and divides it after an accepted one.
    pub damping_factor: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            initial_damping: 1e-3,
            damping_factor: 10.0,
        }
    }
}

impl LmSettings {
    pub fn validate(&self) -> Result<()> {
        precondition(self.max_iterations >= 1, || "max_iterations must be at least 1")?;
        precondition(self.abs_tol > 0.0 && self.rel_tol > 0.0, || "tolerances must be positive")?;
        precondition(self.initial_damping > 0.0, || "initial damping must be positive")?;
        precondition(self.damping_factor > 1.0, || "damping factor must exceed 1")
    }
}

/// Outcome of one ROM time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// Number of Jacobian evaluations.
    pub iterations: usize,
    pub objective_norm: f64,
    /// Objective norm at the start and after every accepted iterate.
    pub history: Vec<f64>,
    pub converged: bool,
}

const MAX_DAMPING: f64 = 1e16;

/// Evaluates the (restricted) objective of one time step for a chart and an optional
/// hyper-reduction operator. Holds the rows of `W ⊙ U` it needs so each evaluation costs
/// only the submesh size (or `d` without hyper-reduction).
pub(crate) struct StepContext<'a, T: Scalar> {
    pub problem: &'a ModelProblem,
    pub chart: &'a Chart<T>,
    pub op: Option<&'a HyperReducedOperator>,
    pub mu: f64,
    pub dt: f64,
    /// `Pˢ(W ⊙ U)`, or all of `W ⊙ U` without hyper-reduction; `None` for the identity chart.
    rows: Option<DenseMatrix<f64>>,
    /// Submesh dofs (identity chart with hyper-reduction).
    dofs: Option<Vec<usize>>,
}

impl<'a, T: Scalar> StepContext<'a, T> {
    pub fn new(
        problem: &'a ModelProblem,
        chart: &'a Chart<T>,
        op: Option<&'a HyperReducedOperator>,
        mu: f64,
        dt: f64,
    ) -> Result<Self> {
        precondition(dt > 0.0, || "dt_rom must be positive")?;
        precondition(chart.dim() == problem.dim() && chart.n_fields() == problem.n_fields(), || {
            "chart does not match the problem"
        })?;
        let dofs = op.map(|o| o.plan().submesh_dofs());
        if let Some(o) = op {
            precondition(o.plan().n_cells() == problem.n_cells(), || "operator built for another mesh")?;
        }
        let rows = chart.basis().map(|b| match &dofs {
            Some(d) => b.weighted_rows(d),
            None => b.weighted_modes(),
        });
        Ok(Self {
            problem,
            chart,
            op,
            mu,
            dt,
            rows,
            dofs,
        })
    }

    /// `Pˢ φ(z)` (or `φ(z)` without hyper-reduction).
    pub fn state(&self, z: &[f64]) -> Result<Vec<f64>> {
        precondition(z.len() == self.chart.latent_dim(), || {
            format!("expected {} latent coordinates, got {}", self.chart.latent_dim(), z.len())
        })?;
        let y = self.chart.filtered(z)?;
        Ok(self.lift(&y))
    }

    fn lift(&self, y: &[f64]) -> Vec<f64> {
        if self.op.is_none() {
            instrument::add_full_state_ops(self.problem.dim());
        }
        match (&self.rows, &self.dofs) {
            (Some(rows), _) => rows.matvec(y),
            (None, Some(dofs)) => dofs.iter().map(|&i| y[i]).collect(),
            (None, None) => y.to_vec(),
        }
    }

    /// State together with the tangent directions `Pˢ(W ⊙ U) Φ[:, j]`.
    fn state_and_tangents(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let (y, jac) = self.chart.filtered_with_jacobian(z)?;
        let x = self.lift(&y);
        let r = z.len();
        let tangents = match (&jac, &self.rows) {
            (Some(j), Some(rows)) => (0..r).map(|k| rows.matvec(j.col(k))).collect(),
            (None, Some(rows)) => (0..r).map(|k| rows.col(k).to_vec()).collect(),
            (_, None) => {
                let mut e = vec![0.0; r];
                (0..r)
                    .map(|k| {
                        e[k] = 1.0;
                        let t = self.lift(&e);
                        e[k] = 0.0;
                        t
                    })
                    .collect()
            }
        };
        Ok((x, tangents))
    }

    /// Objective vector for the restricted state `x` given the restricted previous state.
    pub fn objective(&self, x: &[f64], x_prev: &[f64]) -> Result<Vec<f64>> {
        match self.op {
            None => {
                let c = self.problem.n_fields();
                let s = FullState {
                    values: x.to_vec(),
                    n_fields: c,
                };
                let p = FullState {
                    values: x_prev.to_vec(),
                    n_fields: c,
                };
                residual(self.problem, self.mu, &s, &[p], self.dt)
            }
            Some(op) => {
                let res = residual_on_submesh(self.problem, self.mu, x, x_prev, self.dt, op.plan().index())?;
                op.project(&res)
            }
        }
    }

    /// Forward-difference Jacobian of the objective along the tangent directions.
    fn jacobian(&self, x: &[f64], x_prev: &[f64], f: &[f64], tangents: &[Vec<f64>]) -> Result<DenseMatrix<f64>> {
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut jac = DenseMatrix::zeros(f.len(), tangents.len());
        for (k, t) in tangents.iter().enumerate() {
            let tmax = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if tmax == 0.0 {
                continue;
            }
            let h = f64::EPSILON.sqrt() * scale / tmax;
            let xt: Vec<f64> = x.iter().zip(t).map(|(a, b)| a + h * b).collect();
            let ft = self.objective(&xt, x_prev)?;
            for (dst, (a, b)) in jac.col_mut(k).iter_mut().zip(ft.iter().zip(f)) {
                *dst = (a - b) / h;
            }
        }
        Ok(jac)
    }

    /// Levenberg-Marquardt minimisation of the objective norm, warm-started at `z0`.
    ///
    /// Trial points where the residual is not defined (nonphysical states) count as
    /// rejections. When no damping level yields a decrease the current iterate is a
    /// stationary point to working precision and the step counts as converged.
    pub fn minimize(
        &self,
        z0: &[f64],
        x_prev: &[f64],
        settings: &LmSettings,
        time_index: usize,
    ) -> Result<(Vec<f64>, StepDiagnostics)> {
        let mut z = z0.to_vec();
        let mut x = self.state(&z)?;
        let mut f = self.objective(&x, x_prev)?;
        let mut fnorm = norm2(&f);
        let mut history = vec![fnorm];
        let mut lambda = settings.initial_damping;
        let mut iterations = 0;
        let diag = |iterations, fnorm, history, converged| StepDiagnostics {
            iterations,
            objective_norm: fnorm,
            history,
            converged,
        };

        while iterations < settings.max_iterations {
            if fnorm < settings.abs_tol {
                return Ok((z, diag(iterations, fnorm, history, true)));
            }
            iterations += 1;
            let (_, tangents) = self.state_and_tangents(&z)?;
            let jac = self.jacobian(&x, x_prev, &f, &tangents)?;
            let jtj = jac.tr_matmul(&jac);
            let g = jac.tr_matvec(&f);
            let r = z.len();
            let dmax = (0..r).map(|i| jtj[(i, i)]).fold(0.0f64, f64::max);
            if dmax == 0.0 {
                return Ok((z, diag(iterations, fnorm, history, true)));
            }
            let mut accepted = None;
            while lambda <= MAX_DAMPING {
                let mut a = jtj.clone();
                for i in 0..r {
                    a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * dmax);
                }
                let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
                if let Some(delta) = lu_solve(&a, &rhs) {
                    let zt: Vec<f64> = z.iter().zip(&delta).map(|(a, b)| a + b).collect();
                    if let Ok(xt) = self.state(&zt) {
                        if let Ok(ft) = self.objective(&xt, x_prev) {
                            let nt = norm2(&ft);
                            if nt < fnorm {
                                accepted = Some((zt, xt, ft, nt));
                                lambda /= settings.damping_factor;
                                break;
                            }
                        }
                    }
                }
                lambda *= settings.damping_factor;
            }
            let Some((zt, xt, ft, nt)) = accepted else {
                return Ok((z, diag(iterations, fnorm, history, true)));
            };
            let decrease = (fnorm - nt) / fnorm;
            z = zt;
            x = xt;
            f = ft;
            fnorm = nt;
            history.push(fnorm);
            if fnorm < settings.abs_tol || decrease < settings.rel_tol {
                return Ok((z, diag(iterations, fnorm, history, true)));
            }
        }
        if fnorm < settings.abs_tol {
            return Ok((z, diag(iterations, fnorm, history, true)));
        }
        Err(Error::StepFailed {
            time_index,
            iterations,
            objective: fnorm,
            best: z,
        })
    }
}
