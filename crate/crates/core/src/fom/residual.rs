use crate::error::{precondition, Error, Result};
use crate::instrument;

use super::mesh::{stencil_of, Mesh1d};
use super::problem::{BoundaryCondition, FullState, ModelProblem, ProblemKind};

/// Godunov flux for `f(u) = u²/2`.
#[inline]
pub fn godunov_burgers(ul: f64, ur: f64) -> f64 {
    let a = ul.max(0.0);
    let b = ur.min(0.0);
    (0.5 * a * a).max(0.5 * b * b)
}

/// Pressure from conservative variables.
#[inline]
pub fn euler_pressure(gamma: f64, rho: f64, mom: f64, energy: f64) -> f64 {
    (gamma - 1.0) * (energy - 0.5 * mom * mom / rho)
}

#[inline]
fn euler_flux(gamma: f64, u: [f64; 3]) -> ([f64; 3], f64) {
    let [rho, mom, e] = u;
    let vel = mom / rho;
    let p = euler_pressure(gamma, rho, mom, e);
    let c = (gamma * p / rho).sqrt();
    ([mom, mom * vel + p, (e + p) * vel], vel.abs() + c)
}

/// Rusanov (local Lax-Friedrichs) flux.
#[inline]
pub fn rusanov_euler(gamma: f64, ul: [f64; 3], ur: [f64; 3]) -> [f64; 3] {
    let (fl, sl) = euler_flux(gamma, ul);
    let (fr, sr) = euler_flux(gamma, ur);
    let a = sl.max(sr);
    [
        0.5 * (fl[0] + fr[0]) - 0.5 * a * (ur[0] - ul[0]),
        0.5 * (fl[1] + fr[1]) - 0.5 * a * (ur[1] - ul[1]),
        0.5 * (fl[2] + fr[2]) - 0.5 * a * (ur[2] - ul[2]),
    ]
}

/// Residual of a single cell under implicit Euler. `state(f, cell)` and `prev(f, cell)`
/// read the current and previous states; `left`/`right` are the neighbour cells (`None`
/// at a physical boundary). Writes `c` values into `out`.
///
/// Both the full-mesh and the submesh residual go through this function so their results
/// agree bit for bit.
#[inline]
#[allow(clippy::too_many_arguments)]
fn cell_residual(
    problem: &ModelProblem,
    mu: f64,
    cell: usize,
    left: Option<usize>,
    right: Option<usize>,
    state: &impl Fn(usize, usize) -> f64,
    prev: &impl Fn(usize, usize) -> f64,
    dt: f64,
    out: &mut [f64],
) -> Result<()> {
    let dx = problem.mesh.measure(cell);
    match problem.kind {
        ProblemKind::Burgers { viscosity } => {
            let u = state(0, cell);
            if left.is_none() && problem.boundary == BoundaryCondition::InflowOutflow {
                out[0] = (u - problem.inflow_value(mu)) / dt;
                return Ok(());
            }
            let ul = left.map_or(u, |l| state(0, l));
            let ur = right.map_or(u, |r| state(0, r));
            let flux_r = godunov_burgers(u, ur);
            let flux_l = godunov_burgers(ul, u);
            out[0] = (u - prev(0, cell)) / dt + (flux_r - flux_l) / dx
                - viscosity * (ur - 2.0 * u + ul) / (dx * dx);
        }
        ProblemKind::Euler { gamma } => {
            let read = |c: usize| [state(0, c), state(1, c), state(2, c)];
            let u = read(cell);
            let ul = left.map_or(u, read);
            let ur = right.map_or(u, read);
            for (c, v) in [(cell, u), (left.unwrap_or(cell), ul), (right.unwrap_or(cell), ur)] {
                if v[0] <= 0.0 {
                    return Err(Error::State(format!("density {} at cell {c}", v[0])));
                }
                let p = euler_pressure(gamma, v[0], v[1], v[2]);
                if p <= 0.0 || !p.is_finite() {
                    return Err(Error::State(format!("pressure {p} at cell {c}")));
                }
            }
            let fr = rusanov_euler(gamma, u, ur);
            let fl = rusanov_euler(gamma, ul, u);
            for f in 0..3 {
                out[f] = (u[f] - prev(f, cell)) / dt + (fr[f] - fl[f]) / dx;
            }
        }
    }
    Ok(())
}

fn check_dims(problem: &ModelProblem, state: &FullState) -> Result<()> {
    precondition(
        state.n_fields == problem.n_fields() && state.dim() == problem.dim(),
        || {
            format!(
                "state has {} fields x {} cells, problem expects {} x {}",
                state.n_fields,
                state.n_cells(),
                problem.n_fields(),
                problem.n_cells()
            )
        },
    )
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Data(format!("{what} has non-finite entry at {i}"))),
    }
}

/// Implicit-Euler residual `G(μ, Uᵗ, Uᵗ⁻¹)` on the whole mesh, blockwise by field.
pub fn residual(
    problem: &ModelProblem,
    mu: f64,
    state: &FullState,
    history: &[FullState],
    dt: f64,
) -> Result<Vec<f64>> {
    precondition(dt > 0.0, || "dt must be positive")?;
    let prev = history
        .first()
        .ok_or_else(|| Error::Precondition("implicit Euler needs one previous state".into()))?;
    check_dims(problem, state)?;
    check_dims(problem, prev)?;
    check_finite(&state.values, "state")?;
    check_finite(&prev.values, "previous state")?;

    let m = problem.n_cells();
    let c = problem.n_fields();
    let s = |f: usize, cell: usize| state.values[f * m + cell];
    let p = |f: usize, cell: usize| prev.values[f * m + cell];
    let mut out = vec![0.0; m * c];
    let mut buf = [0.0; 3];
    for cell in 0..m {
        let (l, r) = problem.mesh.neighbors(cell);
        cell_residual(problem, mu, cell, l, r, &s, &p, dt, &mut buf[..c])?;
        for f in 0..c {
            out[f * m + cell] = buf[f];
        }
    }
    instrument::add_cell_residuals(m);
    instrument::add_full_state_ops(m * c);
    Ok(out)
}

/// Local addressing of a submesh: the magic cells, their stencil closure and, for every
/// magic cell, the local positions of itself and its neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmeshIndex {
    magic: Vec<usize>,
    submesh: Vec<usize>,
    /// `(left, self, right)` positions inside `submesh`.
    local: Vec<(Option<usize>, usize, Option<usize>)>,
    n_cells: usize,
}

impl SubmeshIndex {
    /// Builds the index with the stencil closure of `magic` as submesh.
    pub fn new(mesh: &Mesh1d, magic: &[usize]) -> Result<Self> {
        let stencil = stencil_of(mesh, magic)?;
        Self::with_submesh(mesh, magic, &stencil.cells)
    }

    /// Builds the index on an explicit submesh, failing if it misses part of a stencil.
    pub fn with_submesh(mesh: &Mesh1d, magic: &[usize], submesh: &[usize]) -> Result<Self> {
        let mut sorted = submesh.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let find = |cell: usize| -> Result<usize> {
            sorted.binary_search(&cell).map_err(|_| {
                Error::Precondition(format!("stencil coverage gap: cell {cell} missing from submesh"))
            })
        };
        let mut local = Vec::with_capacity(magic.len());
        for &cell in magic {
            precondition(cell < mesh.n_cells(), || format!("magic cell {cell} outside mesh"))?;
            let (l, r) = mesh.neighbors(cell);
            local.push((l.map(find).transpose()?, find(cell)?, r.map(find).transpose()?));
        }
        Ok(Self {
            magic: magic.to_vec(),
            submesh: sorted,
            local,
            n_cells: mesh.n_cells(),
        })
    }

    pub fn magic(&self) -> &[usize] {
        &self.magic
    }

    pub fn submesh(&self) -> &[usize] {
        &self.submesh
    }

    pub fn n_magic(&self) -> usize {
        self.magic.len()
    }

    pub fn n_submesh(&self) -> usize {
        self.submesh.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Degrees of freedom of the submesh, field-major: `P^s` as an index list.
    pub fn submesh_dofs(&self, n_fields: usize) -> Vec<usize> {
        dofs_of(&self.submesh, n_fields, self.n_cells)
    }

    /// Degrees of freedom of the magic cells, field-major: `P` as an index list.
    pub fn magic_dofs(&self, n_fields: usize) -> Vec<usize> {
        dofs_of(&self.magic, n_fields, self.n_cells)
    }

    /// Positions of the magic rows inside the submesh layout (field-major).
    pub fn magic_in_submesh(&self, n_fields: usize) -> Vec<usize> {
        let s = self.submesh.len();
        (0..n_fields)
            .flat_map(|f| self.local.iter().map(move |&(_, k, _)| f * s + k))
            .collect()
    }

    /// Restricts a full vector to the submesh layout.
    pub fn restrict(&self, full: &[f64], n_fields: usize) -> Vec<f64> {
        self.submesh_dofs(n_fields).into_iter().map(|i| full[i]).collect()
    }
}

fn dofs_of(cells: &[usize], n_fields: usize, n_cells: usize) -> Vec<usize> {
    (0..n_fields)
        .flat_map(|f| cells.iter().map(move |&c| f * n_cells + c))
        .collect()
}

/// Residual rows of the magic cells evaluated from submesh values only.
///
/// `restricted_state` and `restricted_prev` use the field-major submesh layout of
/// [`SubmeshIndex::restrict`]; the output is field-major over magic cells. The cost
/// depends only on the submesh size.
pub fn residual_on_submesh(
    problem: &ModelProblem,
    mu: f64,
    restricted_state: &[f64],
    restricted_prev: &[f64],
    dt: f64,
    index: &SubmeshIndex,
) -> Result<Vec<f64>> {
    precondition(dt > 0.0, || "dt must be positive")?;
    precondition(index.n_cells == problem.n_cells(), || "submesh index built for another mesh")?;
    let c = problem.n_fields();
    let s = index.submesh.len();
    precondition(restricted_state.len() == c * s && restricted_prev.len() == c * s, || {
        format!(
            "restricted vectors have lengths {} and {}, submesh needs {}",
            restricted_state.len(),
            restricted_prev.len(),
            c * s
        )
    })?;
    check_finite(restricted_state, "restricted state")?;
    check_finite(restricted_prev, "restricted previous state")?;

    let r_h = index.magic.len();
    let mut out = vec![0.0; r_h * c];
    let mut buf = [0.0; 3];
    for (j, (&cell, &(l, k, r))) in index.magic.iter().zip(&index.local).enumerate() {
        // translate global cell ids back to local slots for this stencil only
        let (gl, gr) = problem.mesh.neighbors(cell);
        let slot = |g: usize| -> usize {
            if g == cell {
                k
            } else if Some(g) == gl {
                l.expect("left neighbour mapped")
            } else {
                debug_assert_eq!(Some(g), gr);
                r.expect("right neighbour mapped")
            }
        };
        let st = |f: usize, g: usize| restricted_state[f * s + slot(g)];
        let pv = |f: usize, g: usize| restricted_prev[f * s + slot(g)];
        cell_residual(problem, mu, cell, gl, gr, &st, &pv, dt, &mut buf[..c])?;
        for f in 0..c {
            out[f * r_h + j] = buf[f];
        }
    }
    instrument::add_cell_residuals(r_h);
    Ok(out)
}
