use crate::error::{precondition, Error, Result};

use super::mesh::Mesh1d;

/// Ratio of specific heats for a diatomic ideal gas.
pub const GAMMA_DIATOMIC: f64 = 7.0 / 5.0;

/// Physics of a model problem.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    /// Viscous Burgers `u_t + (u²/2)_x = ν u_xx`, one field.
    Burgers { viscosity: f64 },
    /// Compressible Euler in conservative variables `(ρ, ρu, ρE)`.
    Euler { gamma: f64 },
}

impl ProblemKind {
    pub fn n_fields(&self) -> usize {
        match self {
            ProblemKind::Burgers { .. } => 1,
            ProblemKind::Euler { .. } => 3,
        }
    }
}

/// Boundary treatment at the two ends of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
    /// Dirichlet inflow at the left end (value `μ`), zero-gradient outflow at the right.
    InflowOutflow,
    /// Zero-gradient ghost cells at both ends.
    Transmissive,
}

/// Parametric initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// `u = μ` for `x < x_front`, `u = right_value` beyond.
    BurgersStep { x_front: f64, right_value: f64 },
    /// `u = right_value + (μ − right_value)·½(1 − tanh((x − x_front)/width))`.
    BurgersSmoothStep {
        x_front: f64,
        right_value: f64,
        width: f64,
    },
    /// `u = μ + amplitude·sin(2πx/L)` (for periodic runs).
    BurgersSine { amplitude: f64 },
    /// Riemann problem with left pressure `μ·p_right`, both sides at rest.
    EulerRiemann {
        x_diaphragm: f64,
        rho_left: f64,
        rho_right: f64,
        p_right: f64,
    },
}

/// Full-order state: `c` fields stacked blockwise, each of length `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    pub values: Vec<f64>,
    pub n_fields: usize,
}

impl FullState {
    pub fn new(values: Vec<f64>, n_fields: usize) -> Result<Self> {
        precondition(n_fields > 0 && values.len() % n_fields == 0, || {
            format!("state of length {} is not divisible into {n_fields} fields", values.len())
        })?;
        Ok(Self { values, n_fields })
    }

    pub fn zeros(n_cells: usize, n_fields: usize) -> Self {
        Self {
            values: vec![0.0; n_cells * n_fields],
            n_fields,
        }
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.values.len() / self.n_fields
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn field(&self, f: usize) -> &[f64] {
        let m = self.n_cells();
        &self.values[f * m..(f + 1) * m]
    }

    #[inline]
    pub fn get(&self, field: usize, cell: usize) -> f64 {
        self.values[field * self.n_cells() + cell]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A parametric model problem with its discretisation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelProblem {
    pub kind: ProblemKind,
    pub mesh: Mesh1d,
    pub boundary: BoundaryCondition,
    pub initial: InitialCondition,
    /// Admissible parameter interval `[lo, hi]`.
    pub param_range: (f64, f64),
    pub dt_ref: f64,
    pub t_final: f64,
}

impl ModelProblem {
    /// Burgers on `[0, 1]` with a smoothed step moving to the right: inflow value and left
    /// state `μ ∈ [1, 2]`, right state 0.5.
    pub fn burgers(n_cells: usize) -> Self {
        Self {
            kind: ProblemKind::Burgers { viscosity: 5e-3 },
            mesh: Mesh1d::uniform(n_cells, 1.0, false),
            boundary: BoundaryCondition::InflowOutflow,
            initial: InitialCondition::BurgersSmoothStep {
                x_front: 0.2,
                right_value: 0.5,
                width: 0.02,
            },
            param_range: (1.0, 2.0),
            dt_ref: 5e-4,
            t_final: 0.2,
        }
    }

    /// Shock tube on `[0, 1]` with pressure ratio `μ ∈ [2, 5]` across the diaphragm.
    pub fn euler(n_cells: usize) -> Self {
        Self {
            kind: ProblemKind::Euler {
                gamma: GAMMA_DIATOMIC,
            },
            mesh: Mesh1d::uniform(n_cells, 1.0, false),
            boundary: BoundaryCondition::Transmissive,
            initial: InitialCondition::EulerRiemann {
                x_diaphragm: 0.5,
                rho_left: 1.0,
                rho_right: 0.125,
                p_right: 0.2,
            },
            param_range: (2.0, 5.0),
            dt_ref: 1e-3,
            t_final: 0.2,
        }
    }

    pub fn with_mesh(mut self, mesh: Mesh1d) -> Self {
        if mesh.is_periodic() {
            self.boundary = BoundaryCondition::Periodic;
        }
        self.mesh = mesh;
        self
    }

    pub fn n_fields(&self) -> usize {
        self.kind.n_fields()
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    /// Number of degrees of freedom `d = c·M`.
    pub fn dim(&self) -> usize {
        self.n_fields() * self.n_cells()
    }

    /// Number of reference steps `N_μ`.
    pub fn n_steps(&self, dt: f64) -> usize {
        (self.t_final / dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        precondition(self.dt_ref > 0.0, || "dt_ref must be positive")?;
        precondition(self.t_final > 0.0, || "t_final must be positive")?;
        precondition(self.param_range.0 <= self.param_range.1, || "empty parameter range")?;
        precondition(
            (self.boundary == BoundaryCondition::Periodic) == self.mesh.is_periodic(),
            || "periodic boundary requires a periodic mesh and vice versa",
        )?;
        match (&self.kind, &self.initial) {
            (ProblemKind::Burgers { viscosity }, ic) => {
                precondition(*viscosity >= 0.0, || "viscosity must be non-negative")?;
                precondition(!matches!(ic, InitialCondition::EulerRiemann { .. }), || {
                    "Burgers problem with Euler initial data"
                })
            }
            (ProblemKind::Euler { gamma }, ic) => {
                precondition(*gamma > 1.0, || "gamma must exceed 1")?;
                precondition(matches!(ic, InitialCondition::EulerRiemann { .. }), || {
                    "Euler problem needs Riemann initial data"
                })?;
                precondition(self.boundary != BoundaryCondition::InflowOutflow, || {
                    "Euler problem supports periodic or transmissive boundaries"
                })
            }
        }
    }

    pub fn check_param(&self, mu: f64) -> Result<()> {
        precondition(mu.is_finite(), || "parameter must be finite")?;
        let (lo, hi) = self.param_range;
        precondition(mu >= lo && mu <= hi, || {
            format!("parameter {mu} outside range [{lo}, {hi}]")
        })
    }

    /// `U_{h,0}(μ)`.
    pub fn initial_state(&self, mu: f64) -> Result<FullState> {
        self.validate()?;
        let x = self.mesh.centers();
        let len = self.mesh.length();
        let m = self.n_cells();
        let values = match (&self.initial, &self.kind) {
            (InitialCondition::BurgersStep { x_front, right_value }, _) => x
                .iter()
                .map(|&xi| if xi < *x_front { mu } else { *right_value })
                .collect(),
            (
                InitialCondition::BurgersSmoothStep {
                    x_front,
                    right_value,
                    width,
                },
                _,
            ) => x
                .iter()
                .map(|&xi| right_value + (mu - right_value) * 0.5 * (1.0 - ((xi - x_front) / width).tanh()))
                .collect(),
            (InitialCondition::BurgersSine { amplitude }, _) => x
                .iter()
                .map(|&xi| mu + amplitude * (2.0 * std::f64::consts::PI * xi / len).sin())
                .collect(),
            (
                InitialCondition::EulerRiemann {
                    x_diaphragm,
                    rho_left,
                    rho_right,
                    p_right,
                },
                ProblemKind::Euler { gamma },
            ) => {
                let mut v = vec![0.0; 3 * m];
                for (i, &xi) in x.iter().enumerate() {
                    let (rho, p) = if xi < *x_diaphragm {
                        (*rho_left, mu * p_right)
                    } else {
                        (*rho_right, *p_right)
                    };
                    v[i] = rho;
                    v[m + i] = 0.0;
                    v[2 * m + i] = p / (gamma - 1.0);
                }
                v
            }
            (InitialCondition::EulerRiemann { .. }, _) => {
                return Err(Error::Precondition("Euler initial data for a scalar problem".into()))
            }
        };
        FullState::new(values, self.n_fields())
    }

    /// Dirichlet value imposed at the inflow cell.
    #[inline]
    pub fn inflow_value(&self, mu: f64) -> f64 {
        mu
    }
}
