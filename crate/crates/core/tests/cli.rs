mod common;

use std::fs;

use common::{code, cstar, subcommand_runs, train_models, write_fixtures};
use tempfile::tempdir;

#[test]
fn prop_convex_with_seed_passes_and_writes_report() {
    let dir = tempdir().unwrap();
    let out = cstar(dir.path(), &["prop-convex", "--seed", "7", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("o/prop-convex.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["seed"], 7);
    assert!(dir.path().join("o/prop-convex.timing.json").exists());
    assert!(dir.path().join("o/prop-convex.summary.csv").exists());
}

#[test]
fn missing_data_file_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let out = cstar(dir.path(), &["rkhm-fit", "--seed", "1", "--data", "missing.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn unknown_flag_and_subcommand_exit_2() {
    let dir = tempdir().unwrap();
    assert_eq!(
        code(&cstar(dir.path(), &["norm-compare", "--seed", "1", "--frobnicate"])),
        2
    );
    assert_eq!(code(&cstar(dir.path(), &["frobnicate", "--seed", "1"])), 2);
    assert_eq!(code(&cstar(dir.path(), &[])), 2);
    assert_eq!(code(&cstar(dir.path(), &["--help"])), 0);
}

#[test]
fn seed_is_mandatory() {
    let dir = tempdir().unwrap();
    let out = cstar(dir.path(), &["norm-compare", "--trials", "5"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    fs::write(dir.path().join("cfg.json"), r#"{"seed": 4, "trials": 5}"#).unwrap();
    assert_eq!(code(&cstar(dir.path(), &["norm-compare", "--config", "cfg.json"])), 0);
}

#[test]
fn flags_override_config_values() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"seed": 4, "out": "a", "trials": 5, "dims": [2, 3]}"#,
    )
    .unwrap();
    assert_eq!(
        code(&cstar(
            dir.path(),
            &["norm-compare", "--config", "cfg.json", "--trials", "7", "--seed", "8"]
        )),
        0
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/norm-compare.json")).unwrap()).unwrap();
    assert_eq!(report["parameters"]["trials"], 7);
    assert_eq!(report["parameters"]["dims"], serde_json::json!([2, 3]));
    assert_eq!(report["seed"], 8);
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"seed": 4, "trails": 5}"#).unwrap();
    assert_eq!(code(&cstar(dir.path(), &["norm-compare", "--config", "cfg.json"])), 2);
}

#[test]
fn zero_training_steps_keep_the_initial_model() {
    let dir = tempdir().unwrap();
    let f = write_fixtures(dir.path());
    let data = f.grid.display().to_string();
    let out = cstar(
        dir.path(),
        &[
            "net-train",
            "--seed",
            "3",
            "--out",
            "o",
            "--data",
            &data,
            "--steps",
            "0",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let init = fs::read(dir.path().join("o/model_init.json")).unwrap();
    let model = fs::read(dir.path().join("o/model.json")).unwrap();
    assert_eq!(init, model);

    // Training from a saved model continues from it.
    let out = cstar(
        dir.path(),
        &[
            "net-train",
            "--seed",
            "9",
            "--out",
            "p",
            "--data",
            &data,
            "--steps",
            "0",
            "--init",
            "o/model.json",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(dir.path().join("p/model.json")).unwrap(), model);
}

#[test]
fn failing_threshold_exits_1() {
    let dir = tempdir().unwrap();
    let f = write_fixtures(dir.path());
    let data = f.grid.display().to_string();
    let out = cstar(
        dir.path(),
        &[
            "rkhm-fit",
            "--seed",
            "1",
            "--data",
            &data,
            "--lambda",
            "10",
            "--max-test-error",
            "1e-12",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn fitted_model_predicts_its_training_data() {
    let dir = tempdir().unwrap();
    let f = write_fixtures(dir.path());
    let data = f.grid.display().to_string();
    let fit = cstar(
        dir.path(),
        &[
            "rkhm-fit",
            "--seed",
            "1",
            "--out",
            "o",
            "--data",
            &data,
            "--test-fraction",
            "0",
            "--lambda",
            "1e-9",
        ],
    );
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let pred = cstar(
        dir.path(),
        &[
            "rkhm-predict",
            "--seed",
            "1",
            "--out",
            "o",
            "--model",
            "o/model.json",
            "--data",
            &data,
        ],
    );
    assert_eq!(code(&pred), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/rkhm-predict.json")).unwrap()).unwrap();
    assert!(report["metrics"]["error_max"].as_f64().unwrap() < 1e-5);
    assert!(dir.path().join("o/predictions.csv").exists());
}

#[test]
fn every_subcommand_is_reproducible_across_thread_counts() {
    let dir = tempdir().unwrap();
    let f = write_fixtures(dir.path());
    train_models(&f, dir.path());
    for (id, args) in subcommand_runs(&f, dir.path()) {
        let mut reports = Vec::new();
        for (run, threads) in [("1", "1"), ("2", "1"), ("3", "4")] {
            let out = format!("runs/{id}-{run}");
            let mut argv: Vec<&str> = args.iter().map(String::as_str).collect();
            argv.extend(["--seed", "11", "--out", &out, "--threads", threads]);
            let o = cstar(dir.path(), &argv);
            assert_eq!(code(&o), 0, "{id}: {}", String::from_utf8_lossy(&o.stderr));
            reports.push(fs::read(dir.path().join(&out).join(format!("{id}.json"))).unwrap());
        }
        assert_eq!(reports[0], reports[1], "{id}");
        assert_eq!(reports[0], reports[2], "{id} with 4 threads");
    }
}
