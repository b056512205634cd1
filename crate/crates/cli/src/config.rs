use std::path::{Path, PathBuf};

use hrom_core::fom::{Mesh1d, ModelProblem, ProblemKind};
use hrom_core::hyper::{HrVariant, SelectionBasis, DEFAULT_ECSW_TOLERANCE};
use hrom_core::lspg::LmSettings;
use hrom_core::manifold::{Activation, Architecture, TrainingConfig};
use serde::Deserialize;

use crate::error::CliError;

/// Experiment definition read from a TOML file. Unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub problem: ProblemConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub snapshots: SnapshotConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
    #[serde(default)]
    pub rom: RomConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("hrom-out")
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProblemName {
    Burgers,
    Euler,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemName,
    pub cells: usize,
    pub dt_ref: Option<f64>,
    pub t_final: Option<f64>,
    pub viscosity: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnapshotConfig {
    /// Keep every `stride`-th training state.
    pub stride: usize,
    /// Keep every `residual_stride`-th Newton residual (residual-basis variants only).
    pub residual_stride: usize,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            residual_stride: 1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub r_rsvd: usize,
    pub oversampling: usize,
    /// Ranks reported in the rSVD error-decay table; empty means `1..=r_rsvd`.
    pub decay_ranks: Vec<usize>,
    /// Rank of the residual basis `U_G`; defaults to `r_rsvd`.
    pub residual_rank: Option<usize>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            r_rsvd: 20,
            oversampling: 10,
            decay_ranks: Vec::new(),
            residual_rank: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ActivationName {
    Elu,
    Linear,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: ActivationName,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            latent_dim: 4,
            hidden: vec![32; 5],
            activation: ActivationName::Elu,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            validation_fraction: t.validation_fraction,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SelectionBasisName {
    State,
    Residual,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RomConfig {
    /// `dense` (no hyper-reduction), `identity`, or a variant such as `C-DEIM`, `RB-SOPT`, `C-UP50`.
    pub methods: Vec<String>,
    pub r_h: usize,
    pub dt_multiplier: usize,
    pub ecsw_tolerance: f64,
    pub selection_basis: SelectionBasisName,
    pub max_iterations: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Keep the best iterate of a non-converged step instead of failing the run.
    pub accept_best: bool,
}

impl Default for RomConfig {
    fn default() -> Self {
        let lm = LmSettings::default();
        Self {
            methods: vec!["dense".into()],
            r_h: 20,
            dt_multiplier: 1,
            ecsw_tolerance: DEFAULT_ECSW_TOLERANCE,
            selection_basis: SelectionBasisName::State,
            max_iterations: lm.max_iterations,
            abs_tol: lm.abs_tol,
            rel_tol: lm.rel_tol,
            accept_best: false,
        }
    }
}

/// A ROM method named in the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Dense LSPG on the trained nonlinear chart.
    Dense,
    /// LSPG with the identity chart (reproduces the FOM).
    Identity,
    Hyper(HrVariant),
}

impl Method {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(Method::Dense),
            "identity" => Ok(Method::Identity),
            _ => s
                .parse::<HrVariant>()
                .map(Method::Hyper)
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn label(self) -> String {
        match self {
            Method::Dense => "dense".into(),
            Method::Identity => "identity".into(),
            Method::Hyper(v) => v.to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let problem = self.model_problem()?;
        problem.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.params.train.is_empty() || self.params.test.is_empty() {
            return bad("params.train and params.test must both be non-empty".into());
        }
        for &mu in self.params.train.iter().chain(&self.params.test) {
            problem.check_param(mu).map_err(|e| CliError::Config(e.to_string()))?;
        }
        for (i, a) in self.params.train.iter().enumerate() {
            if self.params.train[..i].contains(a) {
                return bad(format!("duplicate training parameter {a}"));
            }
            if self.params.test.contains(a) {
                return bad(format!("parameter {a} appears in both train and test"));
            }
        }
        for (i, a) in self.params.test.iter().enumerate() {
            if self.params.test[..i].contains(a) {
                return bad(format!("duplicate test parameter {a}"));
            }
        }
        let counts = [
            ("snapshots.stride", self.snapshots.stride),
            ("snapshots.residual_stride", self.snapshots.residual_stride),
            ("basis.r_rsvd", self.basis.r_rsvd),
            ("autoencoder.latent_dim", self.autoencoder.latent_dim),
            ("autoencoder.epochs", self.autoencoder.epochs),
            ("autoencoder.batch_size", self.autoencoder.batch_size),
            ("rom.r_h", self.rom.r_h),
            ("rom.dt_multiplier", self.rom.dt_multiplier),
            ("rom.max_iterations", self.rom.max_iterations),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.basis.residual_rank == Some(0) || self.autoencoder.hidden.contains(&0) {
            return bad("basis.residual_rank and autoencoder.hidden entries must be positive".into());
        }
        if self.autoencoder.latent_dim > self.basis.r_rsvd {
            return bad("autoencoder.latent_dim must not exceed basis.r_rsvd".into());
        }
        if let Some(&r) = self.basis.decay_ranks.iter().find(|&&r| r == 0 || r > self.basis.r_rsvd) {
            return bad(format!("decay rank {r} outside 1..={}", self.basis.r_rsvd));
        }
        self.training(0).validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.lm_settings().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.rom.ecsw_tolerance >= 0.0 && self.rom.ecsw_tolerance < 1.0) {
            return bad("rom.ecsw_tolerance must lie in [0, 1)".into());
        }
        let methods = self.methods()?;
        if methods.is_empty() {
            return bad("rom.methods must name at least one method".into());
        }
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].contains(m) {
                return bad(format!("method {} listed twice", m.label()));
            }
        }
        Ok(())
    }

    pub fn model_problem(&self) -> Result<ModelProblem, CliError> {
        let p = &self.problem;
        if p.cells < 3 {
            return Err(CliError::Config("problem.cells must be at least 3".into()));
        }
        let mut problem = match p.kind {
            ProblemName::Burgers => ModelProblem::burgers(p.cells),
            ProblemName::Euler => ModelProblem::euler(p.cells),
        };
        if p.periodic {
            let length = problem.mesh.length();
            problem = problem.with_mesh(Mesh1d::uniform(p.cells, length, true));
        }
        match (&mut problem.kind, p.viscosity, p.gamma) {
            (ProblemKind::Burgers { .. }, _, Some(_)) => {
                return Err(CliError::Config("problem.gamma only applies to euler".into()))
            }
            (ProblemKind::Euler { .. }, Some(_), _) => {
                return Err(CliError::Config("problem.viscosity only applies to burgers".into()))
            }
            (ProblemKind::Burgers { viscosity }, Some(v), _) => *viscosity = v,
            (ProblemKind::Euler { gamma }, _, Some(g)) => *gamma = g,
            _ => {}
        }
        if let Some(dt) = p.dt_ref {
            problem.dt_ref = dt;
        }
        if let Some(t) = p.t_final {
            problem.t_final = t;
        }
        Ok(problem)
    }

    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        self.rom.methods.iter().map(|s| Method::parse(s)).collect()
    }

    /// Whether any configured method needs Newton residual snapshots.
    pub fn needs_residuals(&self) -> Result<bool, CliError> {
        use hrom_core::hyper::HrBasis;
        Ok(self.rom.selection_basis == SelectionBasisName::Residual
            || self.methods()?.iter().any(|m| {
                matches!(
                    m,
                    Method::Hyper(HrVariant::Static {
                        basis: HrBasis::Residual,
                        ..
                    })
                )
            }))
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            latent_dim: self.autoencoder.latent_dim,
            filtered_dim: self.basis.r_rsvd,
            hidden: self.autoencoder.hidden.clone(),
            activation: match self.autoencoder.activation {
                ActivationName::Elu => Activation::Elu,
                ActivationName::Linear => Activation::Linear,
            },
        }
    }

    pub fn training(&self, seed: u64) -> TrainingConfig {
        let a = &self.autoencoder;
        TrainingConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            learning_rate: a.learning_rate,
            seed,
            validation_fraction: a.validation_fraction,
        }
    }

    pub fn lm_settings(&self) -> LmSettings {
        LmSettings {
            max_iterations: self.rom.max_iterations,
            abs_tol: self.rom.abs_tol,
            rel_tol: self.rom.rel_tol,
            ..LmSettings::default()
        }
    }

    pub fn selection_basis(&self) -> SelectionBasis {
        match self.rom.selection_basis {
            SelectionBasisName::State => SelectionBasis::State,
            SelectionBasisName::Residual => SelectionBasis::Residual,
        }
    }

    pub fn decay_ranks(&self) -> Vec<usize> {
        if self.basis.decay_ranks.is_empty() {
            (1..=self.basis.r_rsvd).collect()
        } else {
            let mut r = self.basis.decay_ranks.clone();
            r.sort_unstable();
            r.dedup();
            r
        }
    }
}
