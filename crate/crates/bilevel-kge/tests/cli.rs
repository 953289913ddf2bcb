//! End-to-end tests for the `bikg` binary on a small fixture dataset.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bikg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bikg"))
        .args(args)
        .output()
        .expect("spawning bikg")
}

fn run_ok(args: &[&str]) -> String {
    let out = bikg(args);
    assert!(
        out.status.success(),
        "bikg {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Ten chains e_i -> m_i -> t_i over (r0, r1); nine carry the shortcut
/// (e_i, r2, t_i) in train, the tenth shortcut sits in valid. A few higher
/// edges connect chain halves.
fn write_fixture(dir: &Path) {
    let mut train = String::new();
    for i in 0..10 {
        train.push_str(&format!("e{i}\tr0\tm{i}\n"));
        train.push_str(&format!("m{i}\tr1\tt{i}\n"));
        if i < 9 {
            train.push_str(&format!("e{i}\tr2\tt{i}\n"));
        }
    }
    std::fs::write(dir.join("train.tsv"), train).unwrap();
    std::fs::write(dir.join("valid.tsv"), "e9\tr2\tt9\n").unwrap();
    std::fs::write(dir.join("test.tsv"), "e0\tr0\tt0\n").unwrap();
    let higher = |i: usize| format!("e{i}\tr0\tm{i}\thr0\tm{i}\tr1\tt{i}\n");
    std::fs::write(dir.join("higher_train.tsv"), higher(0) + &higher(1)).unwrap();
    std::fs::write(dir.join("higher_valid.tsv"), higher(2)).unwrap();
    std::fs::write(dir.join("higher_test.tsv"), higher(3)).unwrap();
}

#[test]
fn stats_reports_dataset_counts() {
    let dir = TempDir::new().unwrap();
    write_fixture(dir.path());
    let stdout = run_ok(&["stats", "--data", dir.path().to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["V"], 30);
    assert_eq!(v["R"], 3);
    assert_eq!(v["E"], 31);
    assert_eq!(v["R_hat"], 1);
    assert_eq!(v["H"], 4);
    assert_eq!(v["E_hat"], 8);
}

#[test]
fn presets_lists_all_nine() {
    let stdout = run_ok(&["presets"]);
    let names: Vec<&str> = stdout.lines().collect();
    assert_eq!(names.len(), 9);
    assert!(names.contains(&"fbhe-q-tp"));
    assert!(names.contains(&"dbhe-q-blp"));
}

#[test]
fn full_pipeline_augment_train_eval_export() {
    let data = TempDir::new().unwrap();
    write_fixture(data.path());
    let data = data.path().to_str().unwrap().to_owned();
    let work = TempDir::new().unwrap();
    let aug_dir = work.path().join("aug");
    let run_dir = work.path().join("run");
    let export_dir = work.path().join("export");

    // augment: the planted rule (r0, r1) => r2 holds on 9 of 10 chains, so
    // the held-out shortcut is the single mined triple
    let stdout = run_ok(&[
        "augment",
        "--data",
        &data,
        "--out",
        aug_dir.to_str().unwrap(),
        "--walk-attempts",
        "2000",
        "--seed",
        "1",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["augmented_triplets"], 1);
    let augmented = aug_dir.join("augmented.tsv");
    assert_eq!(std::fs::read_to_string(&augmented).unwrap(), "e9\tr2\tt9\n");
    assert!(aug_dir.join("confidence.tsv").exists());
    assert!(aug_dir.join("augment_report.json").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(aug_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["tool"], "bilevel-kge");
    assert_eq!(manifest["dataset_sha256"].as_object().unwrap().len(), 6);

    // train a tiny model using the mined triples
    let stdout = run_ok(&[
        "train",
        "--data",
        &data,
        "--out",
        run_dir.to_str().unwrap(),
        "--augmented",
        augmented.to_str().unwrap(),
        "--valid-task",
        "blp",
        "--d",
        "4",
        "--d-hat",
        "4",
        "--epochs",
        "5",
        "--batch-size",
        "8",
        "--neg-ratio",
        "2",
        "--valid-every",
        "2",
        "--seed",
        "3",
    ]);
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(summary["best_epoch"].is_u64());
    assert!(summary["best_valid_mrr"].is_f64());
    let ckpt = run_dir.join("model.ckpt");
    assert!(ckpt.exists());
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("train_log.json")).unwrap())
            .unwrap();
    assert_eq!(log.as_array().unwrap().len(), 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["outputs"]["augmented_triplets"], 1);
    assert_eq!(manifest["config"]["d"], 4);

    // evaluate the checkpoint on all three tasks
    for task in ["tp", "clp", "blp"] {
        let stdout = run_ok(&[
            "eval",
            "--data",
            &data,
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--task",
            task,
            "--split",
            "test",
            "--per-relation",
        ]);
        let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert!(v["MRR"].as_f64().unwrap() > 0.0, "task {task}: {v}");
        assert!(v["Hit@10"].is_f64());
        assert!(v["queries"].as_u64().unwrap() > 0);
        if task != "blp" {
            assert_eq!(v["per_relation"].as_array().unwrap().len(), 1);
            assert_eq!(v["per_relation"][0]["relation"], "hr0");
        }
    }

    // export labeled embeddings
    run_ok(&[
        "export",
        "--data",
        &data,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        export_dir.to_str().unwrap(),
    ]);
    let entities = std::fs::read_to_string(export_dir.join("entities.csv")).unwrap();
    let mut lines = entities.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 17); // label + 4 * d
    assert_eq!(entities.lines().count(), 31); // header + 30 entities
    assert!(entities.lines().any(|l| l.starts_with("e9,")));
    assert!(export_dir.join("relations.csv").exists());
    assert!(export_dir.join("higher_relations.csv").exists());
    let w = std::fs::read_to_string(export_dir.join("projection.csv")).unwrap();
    assert_eq!(w.lines().count(), 4); // d_hat rows
    assert_eq!(w.lines().next().unwrap().split(',').count(), 12); // 3 * d
}

#[test]
fn missing_dataset_reports_json_error() {
    let out = bikg(&["stats", "--data", "/nonexistent/dataset"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(v["error"].as_str().unwrap().contains("/nonexistent/dataset"));
}

#[test]
fn invalid_hyperparameter_is_rejected() {
    let data = TempDir::new().unwrap();
    write_fixture(data.path());
    let out = bikg(&[
        "augment",
        "--data",
        data.path().to_str().unwrap(),
        "--out",
        data.path().join("aug").to_str().unwrap(),
        "--tau",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("tau"), "stderr: {stderr}");
}

#[test]
fn unknown_preset_is_rejected() {
    let data = TempDir::new().unwrap();
    write_fixture(data.path());
    let out = bikg(&[
        "augment",
        "--data",
        data.path().to_str().unwrap(),
        "--out",
        data.path().join("aug").to_str().unwrap(),
        "--preset",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("nope"), "stderr: {stderr}");
}
