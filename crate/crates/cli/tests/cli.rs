use std::path::Path;
use std::process::{Command, Output};

use rddm_core::io::{schedule_from_csv, schedule_to_csv};
use rddm_core::metrics::MOMENT_NULL_P99_N1E4;
use rddm_core::verify::CHECK_INVENTORY;

fn rddm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rddm"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("RDDM_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn metric(dir: &Path, name: &str) -> f64 {
    let text = read(&dir.join("metrics.csv"));
    let line = text.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap();
    line.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn verify_passes_and_reports_the_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = read(&dir.path().join("verify.csv"));
    let names: Vec<&str> = report.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, CHECK_INVENTORY);
    assert!(report.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn injected_fault_fails_only_ddim_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["verify", "--inject-fault"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let report = read(&dir.path().join("verify.csv"));
    let failed: Vec<&str> = report.lines().filter(|l| l.ends_with(",false")).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(failed.len(), 6);
    assert!(failed.iter().all(|n| n.starts_with("ddim-equivalence/")));
}

#[test]
fn schedule_exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["schedule", "--set", "schedule=ddim-linear"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let adjusted = schedule_from_csv(&read(&dir.path().join("schedule_adjusted.csv"))).unwrap();
    assert!((adjusted.alpha_bar(1000).unwrap() - 1.0).abs() < 1e-12);
    for name in ["schedule_rddm.csv", "schedule_ddim.csv", "schedule_adjusted.csv"] {
        let text = read(&dir.path().join(name));
        assert_eq!(schedule_to_csv(&schedule_from_csv(&text).unwrap()).unwrap(), text);
    }
    assert!(read(&dir.path().join("ddim_view.csv")).starts_with("t,alpha_bar_ddim\n0,"));
}

#[test]
fn schedule_prints_sum_constrained_variance() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["schedule", "-s", "eta=1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |prefix: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(prefix)).unwrap();
        line.rsplit("= ").next().unwrap().trim().parse().unwrap()
    };
    let total = value("sum sigma^2 (rddm");
    assert!(total > 0.0 && total <= value("bbar_T^2") + 1e-12, "{text}");
}

#[test]
fn oracle_sampling_matches_target_moments() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["sample", "-s", "predictor=oracle", "-s", "eta=0", "-s", "steps=100", "-s", "samples=10000"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(metric(dir.path(), "moment_distance") < MOMENT_NULL_P99_N1E4);
}

#[test]
fn rerun_from_resolved_config_is_bitwise_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = rddm(&["sample", "-s", "task=mixture-2d", "-s", "predictor=ground-truth", "-s", "eta=1", "-s", "samples=500", "-s", "steps=20", "-s", "trajectory=true"], a.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = a.path().join("config.resolved");
    let o = rddm(&["sample", "--config", cfg.to_str().unwrap()], b.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["samples.csv", "trajectory.csv", "metrics.csv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
}

#[test]
fn train_then_sample_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let o = rddm(&["train", "-s", "task=shade-restore", "-s", "iterations=200", "-s", "batch_size=1", "-s", "loss=l1", "-s", "hidden=16"], &train);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = train.join("model.ckpt");
    let sample = dir.path().join("sample");
    let o = rddm(
        &["sample", "-s", "task=shade-restore", "-s", "predictor=checkpoint", "-s", &format!("checkpoint={}", ckpt.display()), "-s", "method=sm-res", "-s", "steps=5", "-s", "samples=50", "-s", "pgm=true"],
        &sample,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(metric(&sample, "mse").is_finite());
    assert!(read(&train.join("train_log.csv")).lines().count() == 201);
    assert!(sample.join("sample_0.pgm").exists());
}

#[test]
fn aosa_resolves_residual_on_restoration() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["aosa", "-s", "task=shade-restore", "-s", "seeds=0"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = read(&dir.path().join("aosa_summary.csv"));
    assert!(summary.lines().nth(1).unwrap().starts_with("0,sm-res,"), "{summary}");
    assert!(dir.path().join("aosa_log_seed0.csv").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["sample", "-s", "bogus=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
    let o = rddm(&["schedule", "-s", "schedule=ddim-wavy"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`schedule`"));
    let o = rddm(&["sample", "-s", "predictor=checkpoint", "-s", "checkpoint=/nonexistent/model.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn singular_conversion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["sample", "-s", "task=mixture-2d", "-s", "predictor=ground-truth", "-s", "method=sm-n", "-s", "samples=10"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("SM-Res-N"));
}

#[test]
fn path_experiment_rejects_a_single_network() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let o = rddm(&["train", "-s", "iterations=5", "-s", "hidden=8"], &train);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = format!("checkpoint={}", train.join("model.ckpt").display());
    let o = rddm(&["path-experiment", "-s", "predictor=checkpoint", "-s", &ckpt], &dir.path().join("path"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SM-Res-N-2Net"));
}

#[test]
fn path_experiment_ground_truth_has_no_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let o = rddm(&["path-experiment", "-s", "predictor=ground-truth", "-s", "samples=200", "-s", "steps=10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = read(&dir.path().join("path_experiment.csv"));
    for line in report.lines().skip(1) {
        let max_dev: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(max_dev < 1e-10, "{line}");
    }
}

#[test]
fn output_root_prefixes_relative_dirs() {
    let root = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rddm"))
        .args(["schedule", "--output-dir", "nested"])
        .env("RDDM_OUTPUT_ROOT", root.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(root.path().join("nested/config.resolved").exists());
}

#[test]
fn path_experiment_with_two_trained_networks() {
    let dir = tempfile::tempdir().unwrap();
    let mut ckpts = Vec::new();
    for outputs in ["residual", "noise"] {
        let out = dir.path().join(outputs);
        let o = rddm(&["train", "-s", "task=mixture-2d", "-s", &format!("outputs={outputs}"), "-s", "iterations=50", "-s", "hidden=16"], &out);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        ckpts.push(out.join("model.ckpt"));
    }
    let o = rddm(
        &[
            "path-experiment",
            "-s",
            "task=mixture-2d",
            "-s",
            "predictor=checkpoint",
            "-s",
            &format!("checkpoint={}", ckpts[0].display()),
            "-s",
            &format!("noise_checkpoint={}", ckpts[1].display()),
            "-s",
            "samples=200",
            "-s",
            "steps=10",
        ],
        &dir.path().join("path"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sens = read(&dir.path().join("path/path_sensitivities.csv"));
    // each network reads only its own clock, so the cross-sensitivities vanish
    assert!(sens.contains("residual_wrt_beta_bar,0.0000000000000000e0"), "{sens}");
    assert!(sens.contains("noise_wrt_alpha_bar,0.0000000000000000e0"), "{sens}");
}
