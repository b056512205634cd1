use std::fmt;
use std::str::FromStr;

use crate::error::{precondition, Error, Result};
use crate::fom::{residual_on_submesh, Mesh1d, ModelProblem};
use crate::linalg::{default_rcond, numerical_rank, pseudo_inverse, DenseMatrix};
use crate::manifold::AutoencoderModel;
use crate::scalar::Scalar;
use crate::snapshot::ReducedBasis;

use super::points::{MagicPointSet, SubmeshPlan};
use super::selection::{compute_ecsw_weights, select_deim_greedy, select_sopt_greedy};

/// Default C-UP update period `n` of C-UPn.
pub const DEFAULT_UPDATE_PERIOD: usize = 50;

/// Default ECSW tolerance `τ`.
pub const DEFAULT_ECSW_TOLERANCE: f64 = 1e-6;

/// How the restricted residual enters the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrBasis {
    /// Collocation on the magic rows (C).
    Collocation,
    /// Gappy/weighted against the state basis `U` (FB).
    Full,
    /// Gappy/weighted against the residual basis `U_G` (RB).
    Residual,
}

/// Magic-point sampling rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    Deim,
    Sopt,
    Ecsw,
}

/// The nine static operators plus adaptive collocation C-UPn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HrVariant {
    Static { basis: HrBasis, sampling: Sampling },
    Adaptive { period: usize },
}

impl HrVariant {
    pub const fn new(basis: HrBasis, sampling: Sampling) -> Self {
        HrVariant::Static { basis, sampling }
    }

    pub fn is_collocation(self) -> bool {
        matches!(
            self,
            HrVariant::Adaptive { .. }
                | HrVariant::Static {
                    basis: HrBasis::Collocation,
                    ..
                }
        )
    }

    /// All nine static variants.
    pub fn all_static() -> Vec<HrVariant> {
        let mut out = Vec::new();
        for sampling in [Sampling::Deim, Sampling::Sopt, Sampling::Ecsw] {
            for basis in [HrBasis::Collocation, HrBasis::Full, HrBasis::Residual] {
                out.push(HrVariant::Static { basis, sampling });
            }
        }
        out
    }
}

impl fmt::Display for HrVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HrVariant::Adaptive { period } => write!(f, "C-UP{period}"),
            HrVariant::Static { basis, sampling } => {
                let b = match basis {
                    HrBasis::Collocation => "C",
                    HrBasis::Full => "FB",
                    HrBasis::Residual => "RB",
                };
                let s = match sampling {
                    Sampling::Deim => "DEIM",
                    Sampling::Sopt => "SOPT",
                    Sampling::Ecsw => "ECSW",
                };
                write!(f, "{b}-{s}")
            }
        }
    }
}

impl FromStr for HrVariant {
    type Err = Error;

    /// Accepts `C-DEIM`, `FB-SOPT`, `RB-DEIM-SOPT`, `C-ECSW`, `C-UP`, `C-UP50`, ... (case
    /// insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let bad = || Error::Precondition(format!("unknown hyper-reduction variant `{s}`"));
        if let Some(rest) = up.strip_prefix("C-UP") {
            let period = if rest.is_empty() {
                DEFAULT_UPDATE_PERIOD
            } else {
                rest.parse().map_err(|_| bad())?
            };
            precondition(period >= 1, || "C-UP period must be at least 1")?;
            return Ok(HrVariant::Adaptive { period });
        }
        let (b, s_part) = up.split_once('-').ok_or_else(bad)?;
        let basis = match b {
            "C" => HrBasis::Collocation,
            "FB" => HrBasis::Full,
            "RB" => HrBasis::Residual,
            _ => return Err(bad()),
        };
        let sampling = match s_part {
            "DEIM" => Sampling::Deim,
            "SOPT" | "DEIM-SOPT" | "DEIM-OPT" => Sampling::Sopt,
            "ECSW" => Sampling::Ecsw,
            _ => return Err(bad()),
        };
        Ok(HrVariant::Static { basis, sampling })
    }
}

/// Basis used to sample magic points for collocation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SelectionBasis {
    #[default]
    State,
    Residual,
}

/// Everything [`build_operator`] needs besides the variant.
#[derive(Clone, Copy, Debug)]
pub struct OperatorInputs<'a> {
    /// State basis `U` with `W`.
    pub state_basis: &'a ReducedBasis,
    /// Residual basis `U_G` with `W_G`; required by RB variants.
    pub residual_basis: Option<&'a ReducedBasis>,
    /// Number of sampled (non-boundary) cells.
    pub r_h: usize,
    /// Which basis drives point selection for C variants.
    pub selection_basis: SelectionBasis,
    pub ecsw_tolerance: f64,
}

/// Boundary cells always added to the magic points: both ends of a non-periodic mesh.
pub fn forced_boundary(mesh: &Mesh1d) -> Vec<usize> {
    if mesh.is_periodic() {
        Vec::new()
    } else {
        mesh.boundary_cells().to_vec()
    }
}

/// A built hyper-reduced residual operator.
#[derive(Clone, Debug)]
pub struct HyperReducedOperator {
    variant: HrVariant,
    plan: SubmeshPlan,
    /// `(P U_hr)†`, `r_hr × r_h·c`.
    gappy: Option<DenseMatrix<f64>>,
    /// `P W` or `P W_G`.
    restricted_w: Option<Vec<f64>>,
    /// `Q̃`, one weight per magic row.
    weights: Option<Vec<f64>>,
    /// `‖U_hrᵀQ − c‖` and whether it met the tolerance.
    ecsw_fit: Option<(f64, bool)>,
}

fn select(
    sampling: Sampling,
    u_hr: &DenseMatrix<f64>,
    r_h: usize,
    forced: &[usize],
    n_fields: usize,
    mesh: &Mesh1d,
    tolerance: f64,
) -> Result<(MagicPointSet, Option<Vec<f64>>, Option<(f64, bool)>)> {
    match sampling {
        Sampling::Deim => Ok((select_deim_greedy(u_hr, r_h, forced, n_fields, mesh)?, None, None)),
        Sampling::Sopt => Ok((select_sopt_greedy(u_hr, r_h, forced, n_fields, mesh)?, None, None)),
        Sampling::Ecsw => {
            let e = compute_ecsw_weights(u_hr, tolerance, n_fields)?;
            let support = e.support;
            let selected: Vec<usize> = support.selected().iter().copied().filter(|c| !forced.contains(c)).collect();
            let scores = selected
                .iter()
                .map(|c| support.scores()[support.selected().iter().position(|s| s == c).unwrap()])
                .collect();
            let magic = MagicPointSet::new(forced.to_vec(), selected, scores, mesh.n_cells())?;
            Ok((magic, Some(e.weights), Some((e.residual_norm, e.satisfied))))
        }
    }
}

/// Samples magic points for `variant` and precomputes the gappy matrix, restricted
/// normalization and ECSW weights it needs.
pub fn build_operator(variant: HrVariant, inputs: &OperatorInputs<'_>, problem: &ModelProblem) -> Result<HyperReducedOperator> {
    let mesh = &problem.mesh;
    let c = problem.n_fields();
    precondition(inputs.state_basis.dim() == problem.dim(), || "state basis does not match the problem")?;
    let forced = forced_boundary(mesh);
    let residual_basis = || {
        inputs.residual_basis.ok_or_else(|| {
            Error::Precondition(format!("{variant} needs a residual basis U_G"))
        })
    };
    let (basis_kind, sampling) = match variant {
        HrVariant::Static { basis, sampling } => (basis, sampling),
        HrVariant::Adaptive { period } => {
            precondition(period >= 1, || "C-UP period must be at least 1")?;
            (HrBasis::Collocation, Sampling::Deim)
        }
    };
    let hr_basis = match (basis_kind, inputs.selection_basis) {
        (HrBasis::Full, _) | (HrBasis::Collocation, SelectionBasis::State) => inputs.state_basis,
        (HrBasis::Residual, _) | (HrBasis::Collocation, SelectionBasis::Residual) => residual_basis()?,
    };
    precondition(hr_basis.dim() == problem.dim(), || "hyper-reduction basis does not match the problem")?;
    let u_hr = hr_basis.u();
    let (magic, q, fit) = select(sampling, u_hr, inputs.r_h, &forced, c, mesh, inputs.ecsw_tolerance)?;
    let plan = SubmeshPlan::new(magic, mesh, c)?;
    let rows = plan.magic_dofs();

    let mut op = HyperReducedOperator {
        variant,
        plan,
        gappy: None,
        restricted_w: None,
        weights: None,
        ecsw_fit: fit,
    };
    if basis_kind == HrBasis::Collocation {
        return Ok(op);
    }
    op.restricted_w = Some(hr_basis.normalization().restrict(&rows));
    if sampling == Sampling::Ecsw {
        let q = q.expect("ecsw weights");
        op.weights = Some(rows.iter().map(|&i| q[i]).collect());
    } else {
        let pu = u_hr.select_rows(&rows);
        let rcond = default_rcond(pu.rows(), pu.cols());
        let rank = numerical_rank(&pu, rcond)?;
        if rank < pu.cols() {
            return Err(Error::SingularGappy {
                rank,
                needed: pu.cols(),
            });
        }
        op.gappy = Some(pseudo_inverse(&pu, rcond)?);
    }
    Ok(op)
}

impl HyperReducedOperator {
    /// Pure collocation on a given plan (C-UP after an update, or hand-picked points).
    pub fn collocation(variant: HrVariant, plan: SubmeshPlan) -> Result<Self> {
        precondition(variant.is_collocation(), || format!("{variant} is not a collocation variant"))?;
        Ok(Self {
            variant,
            plan,
            gappy: None,
            restricted_w: None,
            weights: None,
            ecsw_fit: None,
        })
    }

    pub fn variant(&self) -> HrVariant {
        self.variant
    }

    pub fn plan(&self) -> &SubmeshPlan {
        &self.plan
    }

    pub fn gappy(&self) -> Option<&DenseMatrix<f64>> {
        self.gappy.as_ref()
    }

    pub fn restricted_w(&self) -> Option<&[f64]> {
        self.restricted_w.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// ECSW fit residual `‖U_hrᵀQ − c‖` and whether it met `τ‖c‖`.
    pub fn ecsw_fit(&self) -> Option<(f64, bool)> {
        self.ecsw_fit
    }

    pub fn update_period(&self) -> Option<usize> {
        match self.variant {
            HrVariant::Adaptive { period } => Some(period),
            HrVariant::Static { .. } => None,
        }
    }

    /// Replaces the plan of a collocation operator.
    pub fn with_plan(&self, plan: SubmeshPlan) -> Result<Self> {
        Self::collocation(self.variant, plan)
    }

    /// Length of the objective vector.
    pub fn objective_len(&self) -> usize {
        match &self.gappy {
            Some(g) => g.rows(),
            None => self.plan.n_magic_rows(),
        }
    }

    /// Turns restricted residual rows into the objective vector:
    /// C → as is, FB/RB → `(PU_hr)†(res ⊘ PW)`, ECSW weighting → `Q̃ ⊙ (res ⊘ PW)`.
    pub fn project(&self, restricted_residual: &[f64]) -> Result<Vec<f64>> {
        precondition(restricted_residual.len() == self.plan.n_magic_rows(), || {
            format!(
                "restricted residual has {} rows, plan has {}",
                restricted_residual.len(),
                self.plan.n_magic_rows()
            )
        })?;
        let Some(w) = &self.restricted_w else {
            return Ok(restricted_residual.to_vec());
        };
        let scaled: Vec<f64> = restricted_residual.iter().zip(w).map(|(r, w)| r / w).collect();
        if let Some(g) = &self.gappy {
            return Ok(g.matvec(&scaled));
        }
        let q = self.weights.as_ref().expect("weighted operator carries weights");
        Ok(scaled.iter().zip(q).map(|(s, q)| q * s).collect())
    }
}

/// `Pˢ φ(z)`: decoded state on the submesh rows of `plan`, never forming the full state.
pub fn decode_on_submesh<T: Scalar>(
    plan: &SubmeshPlan,
    model: &AutoencoderModel<T>,
    basis: &ReducedBasis,
    z: &[f64],
) -> Result<Vec<f64>> {
    precondition(model.filtered_dim() == basis.r_rsvd(), || "model and basis disagree on r_rSVD")?;
    let y: Vec<f64> = model
        .decode_filtered(&z.iter().map(|&v| T::of(v)).collect::<Vec<_>>())?
        .iter()
        .map(|v| v.to_f64_lossy())
        .collect();
    Ok(basis.weighted_rows(&plan.submesh_dofs()).matvec(&y))
}

/// Objective vector of the hyper-reduced implicit-Euler residual at latent `z` with
/// latent history `history_z` (one previous state).
#[allow(clippy::too_many_arguments)]
pub fn apply_operator<T: Scalar>(
    op: &HyperReducedOperator,
    problem: &ModelProblem,
    mu: f64,
    z: &[f64],
    history_z: &[Vec<f64>],
    model: &AutoencoderModel<T>,
    basis: &ReducedBasis,
    dt: f64,
) -> Result<Vec<f64>> {
    precondition(basis.dim() == problem.dim(), || "basis does not match the problem")?;
    let prev = history_z
        .first()
        .ok_or_else(|| Error::Precondition("implicit Euler needs one previous latent state".into()))?;
    let x = decode_on_submesh(&op.plan, model, basis, z)?;
    let xp = decode_on_submesh(&op.plan, model, basis, prev)?;
    let res = residual_on_submesh(problem, mu, &x, &xp, dt, op.plan.index())?;
    op.project(&res)
}
