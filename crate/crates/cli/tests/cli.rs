use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
seed = 3

[problem]
kind = "burgers"
cells = 50
t_final = 0.02

[params]
train = [1.0, 2.0]
test = [1.5]

[basis]
r_rsvd = 6
decay_ranks = [1, 2, 4, 6]

[autoencoder]
latent_dim = 2
hidden = [8, 8]
epochs = 40
batch_size = 8

[rom]
methods = ["identity", "dense", "C-DEIM", "C-UP10"]
r_h = 6
accept_best = true
"#;

fn hrom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrom")).args(args).output().expect("run hrom")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn step(cmd: &str, config: &Path, out: &Path) {
    let o = hrom(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(
        o.status.success(),
        "hrom {cmd} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn pipeline(config: &Path, out: &Path) {
    for cmd in ["fom", "build", "rom"] {
        step(cmd, config, out);
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn error_kind(out: &Path) -> String {
    let text = fs::read_to_string(out.join("error.json")).expect("error record");
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["kind"].as_str().unwrap().to_string()
}

#[test]
fn tiny_pipeline_is_deterministic_and_complete() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&cfg, &a);
    pipeline(&cfg, &b);

    let manifest = csv_rows(&a.join("fom/manifest.csv"));
    assert_eq!(manifest.len(), 3);
    assert!(manifest.iter().all(|r| r[7] == "ok"));
    let snaps = fs::read_dir(a.join("fom")).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "snap")
    });
    assert_eq!(snaps.count(), 3);

    for file in [
        "fom/train_0.snap",
        "fom/test_0.snap",
        "fom/manifest.csv",
        "build/basis.bin",
        "build/model.bin",
        "build/rsvd_decay.csv",
        "build/points/C-DEIM.csv",
        "build/points/C-SOPT.csv",
        "rom/metrics.csv",
        "rom/runs.csv",
        "rom/errors/C-UP10.csv",
        "rom/errors/AE-REC.csv",
    ] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }

    // identity chart reproduces the FOM
    let metrics = csv_rows(&a.join("rom/metrics.csv"));
    let identity: Vec<f64> = metrics
        .iter()
        .filter(|r| r[0] == "identity")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert!(!identity.is_empty() && identity.iter().all(|&e| e <= 1e-8), "{identity:?}");
    for method in ["AE-REC", "dense", "C-DEIM", "C-UP10"] {
        assert!(metrics.iter().any(|r| r[0] == method && r[1] == "all"), "{method} missing");
    }

    // rSVD training error decays with the rank
    let decay = csv_rows(&a.join("build/rsvd_decay.csv"));
    let train: Vec<f64> = decay.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(train.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{train:?}");

    let runs = csv_rows(&a.join("rom/runs.csv"));
    let cup = runs.iter().find(|r| r[0] == "C-UP10").unwrap();
    assert_eq!(cup[4], "4", "C-UP10 over 40 steps updates before steps 10, 20, 30, 40");
    assert!(a.join("rom/points/C-UP10_1.5.csv").exists());
    let timing = csv_rows(&a.join("rom/timing.csv"));
    assert!(timing.iter().any(|r| r[0] == "C-UP10" && r[1] == "all"));
    let traj = csv_rows(&a.join("rom/trajectories/dense.csv"));
    assert_eq!(traj.len(), 41);
    assert_eq!(traj[0].len(), 2 + 2 + 3);
    assert!(!a.join("error.json").exists());
}

#[test]
fn seed_flag_changes_the_model_but_not_the_fom() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        for cmd in ["fom", "build"] {
            let o = hrom(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed, "--threads", "1"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    assert_eq!(fs::read(a.join("fom/test_0.snap")).unwrap(), fs::read(b.join("fom/test_0.snap")).unwrap());
    assert_ne!(fs::read(a.join("build/model.bin")).unwrap(), fs::read(b.join("build/model.bin")).unwrap());
}

#[test]
fn report_merges_disjoint_methods_and_rejects_duplicates() {
    let tmp = TempDir::new().unwrap();
    let one = TINY.replace(r#"methods = ["identity", "dense", "C-DEIM", "C-UP10"]"#, r#"methods = ["C-DEIM"]"#);
    let two = TINY.replace(r#"methods = ["identity", "dense", "C-DEIM", "C-UP10"]"#, r#"methods = ["C-SOPT"]"#);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&write_config(tmp.path(), "one.toml", &one), &a);
    // second experiment reuses the first one's offline artifacts
    fs::create_dir_all(&b).unwrap();
    for dir in ["fom", "build"] {
        copy_dir(&a.join(dir), &b.join(dir));
    }
    step("rom", &write_config(tmp.path(), "two.toml", &two), &b);

    // AE-REC appears in both, so keep one copy of it
    fs::remove_file(b.join("rom/errors/AE-REC.csv")).unwrap();
    let metrics = b.join("rom/metrics.csv");
    let kept: Vec<String> = fs::read_to_string(&metrics)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("AE-REC"))
        .map(String::from)
        .collect();
    fs::write(&metrics, kept.join("\n") + "\n").unwrap();

    let merged = tmp.path().join("merged");
    let o = hrom(&["report", "--out", merged.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&merged.join("merged_metrics.csv"));
    let count = |p: &Path| csv_rows(&p.join("rom/metrics.csv")).len();
    assert_eq!(rows.len(), count(&a) + count(&b));
    let long = csv_rows(&merged.join("long.csv"));
    assert!(long.iter().any(|r| r[0] == "C-SOPT") && long.iter().any(|r| r[0] == "AE-REC"));

    let dup = tmp.path().join("dup");
    let o = hrom(&["report", "--out", dup.to_str().unwrap(), a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&dup), "config");
}

#[test]
fn failures_set_exit_codes_and_write_error_records() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");

    let bad = write_config(tmp.path(), "bad.toml", &TINY.replace("test = [1.5]", "test = [2.0]"));
    let o = hrom(&["fom", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&out), "config");

    let unknown = write_config(tmp.path(), "unknown.toml", &format!("{TINY}\nbogus = 1\n"));
    let o = hrom(&["fom", "--config", unknown.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let o = hrom(&["build", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_kind(&out), "io");

    let o = hrom(&["fom", "--config", tmp.path().join("missing.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    // a successful run clears the stale record
    step("fom", &cfg, &out);
    assert!(!out.join("error.json").exists());
}

#[test]
fn select_points_exports_deim_and_sopt() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sp.toml",
        &TINY.replace(r#"methods = ["identity", "dense", "C-DEIM", "C-UP10"]"#, r#"methods = ["FB-ECSW"]"#),
    );
    let out = tmp.path().join("out");
    step("fom", &cfg, &out);
    step("build", &cfg, &out);
    fs::remove_dir_all(out.join("build/points")).unwrap();
    step("select-points", &cfg, &out);
    for name in ["C-DEIM", "C-SOPT", "FB-ECSW"] {
        let rows = csv_rows(&out.join(format!("build/points/{name}.csv")));
        assert!(!rows.is_empty(), "{name}");
        // forced boundary cells come first with an empty score
        assert_eq!((rows[0][1].as_str(), rows[0][2].as_str()), ("0", ""));
    }
    let deim = csv_rows(&out.join("build/points/C-DEIM.csv"));
    assert_eq!(deim.len(), 2 + 6);
}

#[test]
fn residual_variants_need_residual_snapshots() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rb.toml",
        &TINY.replace(r#"methods = ["identity", "dense", "C-DEIM", "C-UP10"]"#, r#"methods = ["RB-DEIM"]"#),
    );
    let out = tmp.path().join("out");
    pipeline(&cfg, &out);
    assert!(out.join("fom/train_0.residuals.snap").exists());
    assert!(out.join("build/residual_basis.bin").exists());
    assert!(out.join("rom/errors/RB-DEIM.csv").exists());
}

#[test]
fn linear_autoencoder_matches_truncated_svd() {
    let tmp = TempDir::new().unwrap();
    let text = TINY
        .replace("hidden = [8, 8]", "hidden = [6]\nactivation = \"linear\"\nlearning_rate = 0.01\nvalidation_fraction = 0.0")
        .replace("epochs = 40", "epochs = 1500")
        .replace("latent_dim = 2", "latent_dim = 4")
        .replace(r#"methods = ["identity", "dense", "C-DEIM", "C-UP10"]"#, r#"methods = ["identity"]"#);
    let cfg = write_config(tmp.path(), "lin.toml", &text);
    let out = tmp.path().join("out");
    pipeline(&cfg, &out);
    let decay = csv_rows(&out.join("build/rsvd_decay.csv"));
    let svd_err: f64 = decay.iter().find(|r| r[0] == "4").unwrap()[2].parse().unwrap();
    let metrics = csv_rows(&out.join("rom/metrics.csv"));
    let ae_rec: f64 = metrics.iter().find(|r| r[0] == "AE-REC" && r[1] == "all" && r[2] == "all").unwrap()[3]
        .parse()
        .unwrap();
    assert!(
        (ae_rec - svd_err).abs() <= 0.1 * svd_err,
        "linear AE-REC {ae_rec:.4e} vs rank-4 truncation {svd_err:.4e}"
    );
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}
