//! End-to-end tests of the `tlosslab` binary: exit codes, artifacts,
//! determinism, and the seed-override environment variable.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tlosslab"));
    c.env_remove("TLOSSLAB_SEED");
    c
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn dataset_cfg(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("data.json");
    write(
        &path,
        r#"{"n_train": 5, "n_test": 2, "seed": 11, "side": 16}"#,
    );
    path
}

/// Recursively reads a directory into (relative name, bytes) pairs.
fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn gen_data_is_idempotent_and_importable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset_cfg(dir.path());
    let out1 = dir.path().join("d1");
    let out2 = dir.path().join("d2");
    for out in [&out1, &out2] {
        let res = bin()
            .args(["gen-data", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(res.status.success(), "stderr: {}", stderr(&res));
    }
    assert_eq!(dir_snapshot(&out1), dir_snapshot(&out2));
    let data = tlosslab::datagen::import(&out1).unwrap();
    assert_eq!(data.train.len(), 5);
    assert_eq!(data.test.len(), 2);
}

#[test]
fn bad_config_field_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"n_train": 5, "n_test": 2, "seed": 11, "side": "wide"}"#);
    let res = bin()
        .args(["gen-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    let err = stderr(&res);
    assert!(err.contains("side"), "stderr was: {err}");
}

#[test]
fn invalid_seed_env_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset_cfg(dir.path());
    let res = bin()
        .env("TLOSSLAB_SEED", "not-a-number")
        .args(["gen-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("TLOSSLAB_SEED"));
}

#[test]
fn seed_env_overrides_dataset_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset_cfg(dir.path());
    let plain = dir.path().join("plain");
    let overridden = dir.path().join("overridden");
    let explicit = dir.path().join("explicit");

    let res = bin()
        .args(["gen-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&plain)
        .output()
        .unwrap();
    assert!(res.status.success());

    let res = bin()
        .env("TLOSSLAB_SEED", "77")
        .args(["gen-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&overridden)
        .output()
        .unwrap();
    assert!(res.status.success());

    let cfg77 = dir.path().join("data77.json");
    write(
        &cfg77,
        r#"{"n_train": 5, "n_test": 2, "seed": 77, "side": 16}"#,
    );
    let res = bin()
        .args(["gen-data", "--config"])
        .arg(&cfg77)
        .arg("--out")
        .arg(&explicit)
        .output()
        .unwrap();
    assert!(res.status.success());

    assert_ne!(dir_snapshot(&plain), dir_snapshot(&overridden));
    assert_eq!(dir_snapshot(&overridden), dir_snapshot(&explicit));
}

#[test]
fn inject_noise_writes_corrupted_copy_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset_cfg(dir.path());
    let data_dir = dir.path().join("data");
    let res = bin()
        .args(["gen-data", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&data_dir)
        .output()
        .unwrap();
    assert!(res.status.success());

    let noise_cfg = dir.path().join("noise.json");
    write(
        &noise_cfg,
        &format!(
            r#"{{"data_dir": {:?}, "alpha": 1.0, "beta": 0.8, "seed": 3}}"#,
            data_dir
        ),
    );
    let noisy_dir = dir.path().join("noisy");
    let res = bin()
        .args(["inject-noise", "--config"])
        .arg(&noise_cfg)
        .arg("--out")
        .arg(&noisy_dir)
        .arg("--json")
        .output()
        .unwrap();
    assert!(res.status.success(), "stderr: {}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(report["n_masks"], 5);
    assert_eq!(report["n_selected"], 5);

    let clean = tlosslab::datagen::import(&data_dir).unwrap();
    let noisy = tlosslab::datagen::import(&noisy_dir).unwrap();
    assert_eq!(clean.test, noisy.test);
    let changed = clean
        .train
        .iter()
        .zip(&noisy.train)
        .filter(|(c, n)| c.train_mask != n.train_mask)
        .count();
    assert!(changed > 0, "alpha=1 corrupted nothing");
    for (c, n) in clean.train.iter().zip(&noisy.train) {
        assert_eq!(c.image, n.image);
        assert_eq!(c.clean_mask, n.clean_mask);
    }

    let manifest = std::fs::File::open(noisy_dir.join("manifest.jsonl")).unwrap();
    let records = tlosslab::noise::read_manifest(std::io::BufReader::new(manifest)).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records.iter().all(|r| r.selected));
}

#[test]
fn grad_check_passes_and_emits_json() {
    let res = bin().args(["grad-check", "--json"]).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "stderr: {}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    let suites = report["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 3);
    for suite in suites {
        let err = suite["max_rel_err"].as_f64().unwrap();
        let tol = suite["tolerance"].as_f64().unwrap();
        assert!(err <= tol, "{suite}");
    }
}

#[test]
fn limits_check_passes_with_expected_slopes() {
    let res = bin().args(["limits-check"]).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "stderr: {}", stderr(&res));
    let text = stdout(&res);
    assert!(text.contains("expected 0.75"), "stdout: {text}");
    assert!(text.contains("expected 3"), "stdout: {text}");

    let res = bin().args(["limits-check", "--json"]).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 3);
}

#[test]
fn tiny_sweep_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep-out");
    let cfg = dir.path().join("sweep.json");
    write(
        &cfg,
        &format!(
            r#"{{
                "losses": [{{"kind": "mse"}}],
                "alphas": [0.0, 0.6],
                "betas": [0.7],
                "seeds": [0],
                "dataset": {{"n_train": 6, "n_test": 3, "seed": 5, "side": 16}},
                "train": {{"epochs": 2, "batch_size": 4, "hidden_dim": 4}},
                "out_dir": {:?}
            }}"#,
            out_dir
        ),
    );
    let res = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--jobs", "1", "--json"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0), "stderr: {}", stderr(&res));
    let report: serde_json::Value = serde_json::from_str(&stdout(&res)).unwrap();
    assert_eq!(report["n_cells"], 2);
    assert_eq!(report["n_failed"], 0);

    let results =
        tlosslab_cli::csvio::read_results_file(&out_dir.join("results.csv")).unwrap();
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(|r| r.status == "ok"));
    let summary =
        tlosslab_cli::csvio::read_summary_file(&out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.len(), 2);
    for row in &results {
        let trace =
            tlosslab_cli::csvio::read_trace_file(&out_dir.join(&row.trace_file)).unwrap();
        assert_eq!(trace.len(), 2);
    }
}
