use hrom_core::hyper::{write_magic_csv, HrVariant, ResidualSnapshotSet};
use hrom_core::manifold::{load_model, reconstruction_error_nonlinear, save_model, train_autoencoder, AutoencoderModel};
use hrom_core::snapshot::{
    build_normalization, load_basis, reconstruction_errors, save_basis, ReducedBasis, SnapshotRole, SnapshotSet,
};
use log::info;
use serde::Serialize;

use crate::artifacts::{concat, core_io, create, ensure_dir, file_label, load_role, load_snaps, subsample, write_csv, write_json, Layout};
use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;
use crate::rom::operator_for;

/// Seeds of the offline stages, derived from the experiment seed.
pub fn stage_seeds(seed: u64) -> (u64, u64, u64) {
    (seed, seed.wrapping_add(1), seed.wrapping_add(2))
}

#[derive(Serialize)]
struct DecayRow {
    rank: usize,
    train_err: f64,
    test_err: f64,
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    train_loss: f64,
    validation_loss: Option<f64>,
}

#[derive(Serialize)]
struct BuildSummary {
    seed: u64,
    n_train_snapshots: usize,
    r_rsvd: usize,
    latent_dim: usize,
    best_epoch: usize,
    ae_rec_train: f64,
    residual_rank: Option<usize>,
}

/// Offline stage: normalisation, rSVD, autoencoder training and magic-point selection.
/// Every stage writes its artifact before the next one starts.
pub fn run(cfg: &ExperimentConfig, layout: &Layout) -> Result<(), CliError> {
    let problem = cfg.model_problem()?;
    let (svd_seed, residual_seed, train_seed) = stage_seeds(cfg.seed);
    let train_blocks = load_role(layout, "train")?;
    let test_blocks = load_role(layout, "test")?;

    let blocks: Vec<_> = train_blocks
        .iter()
        .map(|(_, s)| subsample(s, cfg.snapshots.stride))
        .collect::<Result<_, _>>()?;
    let raw_train = concat(&blocks)?;
    let raw_test = concat(&test_blocks.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>())?;
    let normalization =
        build_normalization(raw_train.columns(), raw_train.n_fields, &problem.mesh).map_err(CliError::stage("normalization"))?;
    let train = SnapshotSet::from_raw(&raw_train, &normalization, SnapshotRole::Train).map_err(CliError::stage("normalization"))?;
    let test = SnapshotSet::from_raw(&raw_test, &normalization, SnapshotRole::Test).map_err(CliError::stage("normalization"))?;
    info!("build: {} training snapshots of dimension {}", train.n_cols(), train.dim());
    ensure_dir(&layout.build_dir())?;

    let basis = ReducedBasis::from_snapshots(&train, cfg.basis.r_rsvd, cfg.basis.oversampling, svd_seed)
        .map_err(CliError::stage("rsvd"))?;
    save_basis(&layout.basis(), &basis).map_err(|e| core_io(&layout.basis(), e))?;
    let decay = cfg
        .decay_ranks()
        .into_iter()
        .map(|r| {
            let b = basis.truncate(r);
            Ok(DecayRow {
                rank: r,
                train_err: reconstruction_errors(&b, &train).map_err(CliError::stage("rsvd"))?.mean,
                test_err: reconstruction_errors(&b, &test).map_err(CliError::stage("rsvd"))?.mean,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_csv(&layout.build_dir().join("rsvd_decay.csv"), &decay)?;

    let filtered = basis.filter_set(&train).map_err(CliError::stage("training"))?;
    let outcome = train_autoencoder(&filtered, &cfg.architecture(), &cfg.training(train_seed))
        .map_err(CliError::stage("training"))?;
    save_model(&layout.model(), &outcome.model).map_err(|e| core_io(&layout.model(), e))?;
    let losses: Vec<LossRow> = outcome
        .history
        .iter()
        .enumerate()
        .map(|(epoch, l)| LossRow {
            epoch,
            train_loss: l.train,
            validation_loss: l.validation,
        })
        .collect();
    write_csv(&layout.build_dir().join("training.csv"), &losses)?;
    let ae_rec_train = reconstruction_error_nonlinear(&outcome.model, &basis, &train)
        .map_err(CliError::stage("training"))?
        .mean;

    let residual_rank = if cfg.needs_residuals()? {
        let rank = cfg.basis.residual_rank.unwrap_or(cfg.basis.r_rsvd);
        let blocks = train_blocks
            .iter()
            .map(|(row, _)| load_snaps(&layout.fom_dir().join(&row.residual_file)))
            .collect::<Result<Vec<_>, _>>()?;
        let set = ResidualSnapshotSet::from_raw(concat(&blocks)?, &problem.mesh).map_err(CliError::stage("residual basis"))?;
        let g = set
            .basis(rank, cfg.basis.oversampling, residual_seed)
            .map_err(CliError::stage("residual basis"))?;
        save_basis(&layout.residual_basis(), &g).map_err(|e| core_io(&layout.residual_basis(), e))?;
        Some(g.r_rsvd())
    } else {
        None
    };

    select_points(cfg, layout)?;
    write_json(
        &layout.build_dir().join("summary.json"),
        &BuildSummary {
            seed: cfg.seed,
            n_train_snapshots: train.n_cols(),
            r_rsvd: basis.r_rsvd(),
            latent_dim: cfg.autoencoder.latent_dim,
            best_epoch: outcome.best_epoch,
            ae_rec_train,
            residual_rank,
        },
    )
}

/// Offline artifacts needed by the online stage.
pub struct Offline {
    pub basis: ReducedBasis,
    pub residual_basis: Option<ReducedBasis>,
    pub model: AutoencoderModel<f64>,
}

pub fn load_offline(layout: &Layout) -> Result<Offline, CliError> {
    let basis = load_basis(&layout.basis()).map_err(|e| core_io(&layout.basis(), e))?;
    let model = load_model(&layout.model()).map_err(|e| core_io(&layout.model(), e))?;
    let path = layout.residual_basis();
    let residual_basis = if path.exists() {
        Some(load_basis(&path).map_err(|e| core_io(&path, e))?)
    } else {
        None
    };
    Ok(Offline {
        basis,
        residual_basis,
        model,
    })
}

/// Writes `build/points/<variant>.csv` for C-DEIM, C-SOPT and every static variant in the
/// config (C-UP plans start from C-DEIM).
pub fn select_points(cfg: &ExperimentConfig, layout: &Layout) -> Result<(), CliError> {
    let problem = cfg.model_problem()?;
    let offline = load_offline(layout)?;
    ensure_dir(&layout.points_dir())?;
    let mut variants: Vec<HrVariant> = vec!["C-DEIM".parse().unwrap(), "C-SOPT".parse().unwrap()];
    for m in cfg.methods()? {
        if let Method::Hyper(v @ HrVariant::Static { .. }) = m {
            if !variants.contains(&v) {
                variants.push(v);
            }
        }
    }
    for v in variants {
        let op = operator_for(cfg, &problem, &offline, v)?;
        let path = layout.points_dir().join(format!("{}.csv", file_label(&v.to_string())));
        write_magic_csv(create(&path)?, &op.plan().magic().rows(0)).map_err(|e| core_io(&path, e))?;
    }
    Ok(())
}
