use hrom_core::fom::{solve_fom, FullState, Mesh1d, ModelProblem};
use hrom_core::linalg::{thin_svd, DenseMatrix};
use hrom_core::manifold::{
    decode, encode, reconstruction_error_nonlinear, train_autoencoder, Activation, Architecture,
    AutoencoderModel, Layer, TrainingConfig,
};
use hrom_core::snapshot::{
    build_normalization, reconstruction_errors, ColumnMeta, RawSnapshots, ReducedBasis, SnapshotRole,
    SnapshotSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, r: usize, p: usize) -> AutoencoderModel<f64> {
    let depth = rng.random_range(1..4);
    let arch = Architecture {
        latent_dim: r,
        filtered_dim: p,
        hidden: (0..depth).map(|_| rng.random_range(3..9)).collect(),
        activation: Activation::Elu,
    };
    let mut m = AutoencoderModel::random(&arch, rng.random()).unwrap();
    // non-zero biases so that ELU kinks are visited on both sides
    let enc: Vec<Layer<f64>> = m.encoder().to_vec();
    let dec: Vec<Layer<f64>> = m
        .decoder()
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            l
        })
        .collect();
    m = AutoencoderModel::new(enc, dec).unwrap();
    m
}

/// Straightforward layer-by-layer evaluation written independently of the library.
fn oracle_decode(m: &AutoencoderModel<f64>, z: &[f64]) -> Vec<f64> {
    let mut h = z.to_vec();
    for l in m.decoder() {
        let mut out = Vec::with_capacity(l.outputs());
        for i in 0..l.outputs() {
            let mut s = l.bias[i];
            for (j, hj) in h.iter().enumerate() {
                s += l.weight[(i, j)] * hj;
            }
            out.push(match l.activation {
                Activation::Elu if s <= 0.0 => s.exp() - 1.0,
                _ => s,
            });
        }
        h = out;
    }
    h
}

fn tiny_basis(rng: &mut ChaCha8Rng, m: usize, p: usize) -> (ReducedBasis, SnapshotSet) {
    let mesh = Mesh1d::from_measures((0..m).map(|_| rng.random_range(0.5..1.5)).collect(), false).unwrap();
    let cols: Vec<Vec<f64>> = (0..3 * p)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let meta = (0..cols.len()).map(|j| ColumnMeta { mu: 1.0, time: j as f64 }).collect();
    let raw = RawSnapshots::new(DenseMatrix::from_columns(m, &cols).unwrap(), meta, 1, m).unwrap();
    let w = build_normalization(raw.columns(), 1, &mesh).unwrap();
    let set = SnapshotSet::from_raw(&raw, &w, SnapshotRole::Train).unwrap();
    (ReducedBasis::from_snapshots(&set, p, 2, 7).unwrap(), set)
}

#[test]
fn decode_matches_independent_forward_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let m = random_model(&mut rng, 3, 6);
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = m.decode_filtered(&z).unwrap();
        for (a, b) in got.iter().zip(oracle_decode(&m, &z)) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }
}

#[test]
fn decoder_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let (r, p) = (rng.random_range(1..5), rng.random_range(5..12));
        let m = random_model(&mut rng, r, p);
        let z: Vec<f64> = (0..r).map(|_| rng.random_range(-1.5..1.5)).collect();
        let jac = m.decoder_jacobian(&z).unwrap();
        let h = 1e-6;
        let mut fd = DenseMatrix::zeros(p, r);
        for j in 0..r {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[j] += h;
            zm[j] -= h;
            let (fp, fm) = (oracle_decode(&m, &zp), oracle_decode(&m, &zm));
            for i in 0..p {
                fd[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rel = jac.sub(&fd).frobenius_norm() / fd.frobenius_norm();
        assert!(rel <= 1e-5, "relative Frobenius error {rel}");
    }
}

#[test]
fn identity_chart_is_the_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (basis, set) = tiny_basis(&mut rng, 20, 5);
    let id = AutoencoderModel::<f64>::identity(5);
    let z: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let state = decode(&id, &basis, &z).unwrap();
    assert_eq!(state.values, basis.unfilter(&z).unwrap());
    let back = encode(&id, &basis, &state).unwrap();
    for (a, b) in back.iter().zip(&z) {
        assert!((a - b).abs() < 1e-12);
    }
    let ae = reconstruction_error_nonlinear(&id, &basis, &set).unwrap();
    let lin = reconstruction_errors(&basis, &set).unwrap();
    assert_eq!(ae.mean, lin.mean);
    assert_eq!(ae.max, lin.max);

    let zero = FullState::zeros(20, 1);
    assert!(encode(&random_model(&mut rng, 2, 5), &basis, &zero).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn zero_weight_decoder_returns_weighted_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (basis, _) = tiny_basis(&mut rng, 12, 4);
    let b = vec![0.3, -1.0, 2.0, 0.5];
    let dec = vec![Layer::new(DenseMatrix::zeros(4, 2), b.clone(), Activation::Linear).unwrap()];
    let enc = vec![Layer::new(DenseMatrix::zeros(2, 4), vec![0.0; 2], Activation::Linear).unwrap()];
    let m = AutoencoderModel::new(enc, dec).unwrap();
    let state = decode(&m, &basis, &[5.0, -3.0]).unwrap();
    let ub = basis.u().matvec(&b);
    for (i, v) in state.values.iter().enumerate() {
        assert!((v - basis.normalization().w()[i] * ub[i]).abs() < 1e-14);
    }
}

#[test]
fn decode_respects_lipschitz_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (basis, _) = tiny_basis(&mut rng, 16, 6);
    let spectral = |a: &DenseMatrix<f64>| thin_svd(a).unwrap().singular_values[0];
    for _ in 0..5 {
        let m = random_model(&mut rng, 2, 6);
        // ELU is 1-Lipschitz, so the product of layer norms bounds the decoder
        let bound = m.decoder().iter().map(|l| spectral(&l.weight)).product::<f64>() * spectral(&basis.weighted_modes());
        assert!(bound.is_finite());
        for _ in 0..20 {
            let z1: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let z2: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d1 = decode(&m, &basis, &z1).unwrap().values;
            let d2 = decode(&m, &basis, &z2).unwrap().values;
            let num = d1.iter().zip(&d2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den = z1.iter().zip(&z2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(num <= bound * den * (1.0 + 1e-12));
        }
    }
}

#[test]
fn memorises_a_single_point() {
    let data = DenseMatrix::<f64>::from_columns(6, &[vec![0.5, -1.0, 2.0, 0.1, 0.0, 3.0]]).unwrap();
    let arch = Architecture {
        latent_dim: 1,
        filtered_dim: 6,
        hidden: vec![8],
        activation: Activation::Elu,
    };
    let cfg = TrainingConfig {
        epochs: 300,
        validation_fraction: 0.0,
        ..Default::default()
    };
    let out = train_autoencoder(&data, &arch, &cfg).unwrap();
    assert!(out.history[out.best_epoch].train < 1e-6, "{:?}", out.history.last());
    let y = out.model.decode_filtered(&out.model.encode_filtered(data.col(0)).unwrap()).unwrap();
    let err: f64 = y.iter().zip(data.col(0)).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 6.0;
    assert!(err < 1e-6);
}

#[test]
fn linear_autoencoder_matches_truncated_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (p, n, r) = (8, 200, 2);
    // spectrum decaying as 2^-k
    let factors: Vec<Vec<f64>> = (0..p).map(|k| (0..n).map(|_| rng.random_range(-1.0..1.0) * 0.5f64.powi(k as i32)).collect()).collect();
    let q = thin_svd(&DenseMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0))).unwrap().u;
    let data = DenseMatrix::<f64>::from_fn(p, n, |i, j| (0..p).map(|k| q[(i, k)] * factors[k][j]).sum());
    let svd = thin_svd(&data).unwrap();
    let svd_err = svd.singular_values[r..].iter().map(|s| s * s).sum::<f64>().sqrt() / data.frobenius_norm();

    let arch = Architecture {
        latent_dim: r,
        filtered_dim: p,
        hidden: vec![6],
        activation: Activation::Linear,
    };
    let cfg = TrainingConfig {
        epochs: 400,
        validation_fraction: 0.0,
        seed: 11,
        ..Default::default()
    };
    let model = train_autoencoder(&data, &arch, &cfg).unwrap().model;
    let mut sq = 0.0f64;
    for j in 0..n {
        let y = model.decode_filtered(&model.encode_filtered(data.col(j)).unwrap()).unwrap();
        sq += y.iter().zip(data.col(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    let ae_err = sq.sqrt() / data.frobenius_norm();
    assert!(ae_err <= 1.1 * svd_err, "linear AE {ae_err} vs SVD {svd_err}");
}

#[test]
fn burgers_autoencoder_beats_linear_rank_two_and_bounds_hold() {
    let mut p = ModelProblem::burgers(100);
    p.t_final = 0.2;
    let trajs: Vec<_> = [1.0, 1.25, 1.5, 1.75, 2.0].iter().map(|&mu| solve_fom(&p, mu).unwrap()).collect();
    let raw = RawSnapshots::from_trajectories(&trajs, 2).unwrap();
    let w = build_normalization(raw.columns(), 1, &p.mesh).unwrap();
    let set = SnapshotSet::from_raw(&raw, &w, SnapshotRole::Train).unwrap();
    let basis = ReducedBasis::from_snapshots(&set, 12, 10, 2).unwrap();
    let arch = Architecture {
        hidden: vec![16; 3],
        ..Architecture::new(2, 12)
    };
    let cfg = TrainingConfig {
        epochs: 800,
        ..Default::default()
    };
    let out = train_autoencoder(&basis.filter_set(&set).unwrap(), &arch, &cfg).unwrap();
    let ae = reconstruction_error_nonlinear(&out.model, &basis, &set).unwrap();
    let lin2 = reconstruction_errors(&basis.truncate(2), &set).unwrap();
    assert!(ae.mean < lin2.mean, "AE-REC {} vs rank-2 {}", ae.mean, lin2.mean);

    // φ∘ψ factors through span(W⊙U): never better than the linear projection
    let proj = reconstruction_errors(&basis, &set).unwrap();
    for (a, l) in ae.columns.iter().zip(&proj.columns) {
        assert!(a.total.unwrap() >= l.total.unwrap() * (1.0 - 1e-9));
    }
}

#[test]
fn single_precision_model_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_model(&mut rng, 3, 7);
    let m32: AutoencoderModel<f32> = m.cast();
    let z = [0.3, -0.2, 0.9];
    let a = m.decode_filtered(&z).unwrap();
    let b = m32.decode_filtered(&[0.3f32, -0.2, 0.9]).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - *y as f64).abs() < 1e-5 * x.abs().max(1.0));
    }
    let j32 = m32.decoder_jacobian(&[0.3f32, -0.2, 0.9]).unwrap();
    assert_eq!(j32.shape(), (7, 3));
}
