//! End-to-end tests of the compiled binary: exit codes, artifact layout,
//! determinism, and the config snapshot round trip.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skillgen"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn run_ok(args: &[&str]) -> String {
    let output = run(args);
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

fn gen_demos(dir: &Path) -> String {
    let out = dir.to_str().unwrap().to_string();
    run_ok(&[
        "gen-demos",
        "--maze",
        "u",
        "--trajectories",
        "50",
        "--noise",
        "0.05",
        "--seed",
        "3",
        "--out-dir",
        &out,
    ]);
    format!("{out}/demos.jsonl")
}

#[test]
fn help_is_not_an_error_but_misuse_is() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["extract", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["bogus-command"]).status.code(), Some(1));
    assert_eq!(run(&["extract", "--strategy", "bogus"]).status.code(), Some(1));
}

#[test]
fn gen_demos_writes_dataset_and_snapshot_deterministically() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    gen_demos(&first);
    gen_demos(&second);

    let data = std::fs::read(first.join("demos.jsonl")).unwrap();
    assert_eq!(
        std::fs::read_to_string(first.join("demos.jsonl"))
            .unwrap()
            .lines()
            .count(),
        50
    );
    assert_eq!(data, std::fs::read(second.join("demos.jsonl")).unwrap());

    let snapshot = std::fs::read_to_string(first.join("resolved_config.toml")).unwrap();
    assert!(snapshot.contains("command = \"gen-demos\""));
    assert!(snapshot.contains("trajectories = 50"));
}

#[test]
fn snapshot_reproduces_the_run_it_recorded() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    gen_demos(&first);
    let replay = dir.path().join("replay");
    run_ok(&[
        "gen-demos",
        "--config",
        first.join("resolved_config.toml").to_str().unwrap(),
        "--out-dir",
        replay.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(first.join("demos.jsonl")).unwrap(),
        std::fs::read(replay.join("demos.jsonl")).unwrap()
    );
}

#[test]
fn extract_honors_the_prune_target_and_reports_stats() {
    let dir = TempDir::new().unwrap();
    let demos = gen_demos(&dir.path().join("demos"));
    let lib_dir = dir.path().join("lib");
    let stdout = run_ok(&[
        "extract",
        "--dataset",
        &demos,
        "--n-min",
        "6",
        "--out-dir",
        lib_dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("6 skills"), "stdout: {stdout}");
    assert!(stdout.contains("mean length"), "stdout: {stdout}");

    let library: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(lib_dir.join("library.json")).unwrap())
            .unwrap();
    assert_eq!(library["skills"].as_array().unwrap().len(), 6);
}

#[test]
fn train_emits_all_artifacts_per_seed() {
    let dir = TempDir::new().unwrap();
    let demos = gen_demos(&dir.path().join("demos"));
    let lib_dir = dir.path().join("lib");
    run_ok(&[
        "extract",
        "--dataset",
        &demos,
        "--n-min",
        "6",
        "--out-dir",
        lib_dir.to_str().unwrap(),
    ]);
    let train_dir = dir.path().join("train");
    let stdout = run_ok(&[
        "train",
        "--maze",
        "u",
        "--library",
        lib_dir.join("library.json").to_str().unwrap(),
        "--budget",
        "1800",
        "--seeds",
        "0,1",
        "--episodes",
        "5",
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("over 2 seeds"), "stdout: {stdout}");
    for name in [
        "policy_seed0.json",
        "policy_seed1.json",
        "rollout_seed0.csv",
        "rollout_seed1.csv",
        "heatmap_seed0.csv",
        "heatmap_seed0.pgm",
        "heatmap_seed1.pgm",
        "report.csv",
        "resolved_config.toml",
    ] {
        assert!(train_dir.join(name).exists(), "missing {name}");
    }

    // Header, one row per seed, then the mean and std rows.
    let report = std::fs::read_to_string(train_dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "seed,success,coverage");
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("mean,"));
    assert!(lines[4].starts_with("std,"));

    // The rollout holds exactly the trained budget: header plus one line
    // per primitive step.
    let rollout = std::fs::read_to_string(train_dir.join("rollout_seed0.csv")).unwrap();
    assert_eq!(rollout.lines().count(), 1801);
    assert_eq!(rollout.lines().next().unwrap(), "episode,t,x,y,reward");

    // Training twice with the same seed is bit-identical.
    let again = dir.path().join("train2");
    run_ok(&[
        "train",
        "--maze",
        "u",
        "--library",
        lib_dir.join("library.json").to_str().unwrap(),
        "--budget",
        "1800",
        "--seeds",
        "0,1",
        "--episodes",
        "5",
        "--out-dir",
        again.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(train_dir.join("policy_seed0.json")).unwrap(),
        std::fs::read(again.join("policy_seed0.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(train_dir.join("report.csv")).unwrap(),
        std::fs::read(again.join("report.csv")).unwrap()
    );
}

#[test]
fn evaluate_reloads_a_saved_policy() {
    let dir = TempDir::new().unwrap();
    let demos = gen_demos(&dir.path().join("demos"));
    let lib_dir = dir.path().join("lib");
    run_ok(&[
        "extract",
        "--dataset",
        &demos,
        "--n-min",
        "6",
        "--out-dir",
        lib_dir.to_str().unwrap(),
    ]);
    let train_dir = dir.path().join("train");
    run_ok(&[
        "train",
        "--maze",
        "u",
        "--library",
        lib_dir.join("library.json").to_str().unwrap(),
        "--budget",
        "1800",
        "--seeds",
        "0",
        "--episodes",
        "5",
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    let eval_dir = dir.path().join("eval");
    let stdout = run_ok(&[
        "evaluate",
        "--maze",
        "u",
        "--library",
        lib_dir.join("library.json").to_str().unwrap(),
        "--policy",
        train_dir.join("policy_seed0.json").to_str().unwrap(),
        "--episodes",
        "12",
        "--seed",
        "7",
        "--out-dir",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(stdout.contains("over 12 episodes"), "stdout: {stdout}");
    let report = std::fs::read_to_string(eval_dir.join("report.csv")).unwrap();
    assert!(report.starts_with("seed,success,coverage\n7,"));
}

#[test]
fn primitives_library_is_the_codebook() {
    let dir = TempDir::new().unwrap();
    let demos = gen_demos(&dir.path().join("demos"));
    let train_dir = dir.path().join("train");
    run_ok(&[
        "train",
        "--maze",
        "u",
        "--library",
        "primitives",
        "--dataset",
        &demos,
        "--budget",
        "1200",
        "--seeds",
        "0",
        "--episodes",
        "5",
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    let policy: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(train_dir.join("policy_seed0.json")).unwrap(),
    )
    .unwrap();
    // The u maze demos are planar, so auto k doubles d_act = 2.
    assert_eq!(policy["n_skills"], 4);
}

#[test]
fn ablate_writes_one_row_per_cell() {
    let dir = TempDir::new().unwrap();
    let demos = gen_demos(&dir.path().join("demos"));
    let ablate_dir = dir.path().join("ablate");
    run_ok(&[
        "ablate",
        "--maze",
        "u",
        "--dataset",
        &demos,
        "--budget",
        "1200",
        "--seeds",
        "0",
        "--episodes",
        "5",
        "--sweep-n-min",
        "4,6",
        "--sweep-strategy",
        "mahalanobis,frequency",
        "--out-dir",
        ablate_dir.to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(ablate_dir.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(
        lines[0],
        "k,n_max,n_min,strategy,subsample,success_mean,success_std,coverage_mean,coverage_std,skill_length_mean"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("4,128,4,mahalanobis,"));
    assert!(lines[2].starts_with("4,128,4,frequency,"));
    assert!(lines[3].starts_with("4,128,6,mahalanobis,"));
    assert!(lines[4].starts_with("4,128,6,frequency,"));
}

#[test]
fn stats_describes_datasets_and_libraries() {
    let dir = TempDir::new().unwrap();
    let demos = gen_demos(&dir.path().join("demos"));
    let out = dir.path().join("stats");
    let stdout = run_ok(&[
        "stats",
        "--dataset",
        &demos,
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("trajectories: 50"), "stdout: {stdout}");
    assert!(stdout.contains("act dim: 2"), "stdout: {stdout}");

    let lib_dir = dir.path().join("lib");
    run_ok(&[
        "extract",
        "--dataset",
        &demos,
        "--n-min",
        "6",
        "--out-dir",
        lib_dir.to_str().unwrap(),
    ]);
    let stdout = run_ok(&[
        "stats",
        "--library",
        lib_dir.join("library.json").to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("skills: 6"), "stdout: {stdout}");
    assert!(stdout.contains("skill length:"), "stdout: {stdout}");
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    // Unreadable input data.
    let missing = run(&["extract", "--dataset", "/nonexistent.jsonl", "--out-dir", out]);
    assert_eq!(missing.status.code(), Some(2));

    // Configuration the pipeline rejects.
    let demos = gen_demos(&dir.path().join("demos"));
    let bad_k = run(&["extract", "--dataset", &demos, "--k", "1", "--out-dir", out]);
    assert_eq!(bad_k.status.code(), Some(1));

    // stats needs exactly one input.
    let neither = run(&["stats", "--out-dir", out]);
    assert_eq!(neither.status.code(), Some(1));
    let lib = dir.path().join("demos").join("library.json");
    let both = run(&[
        "stats",
        "--dataset",
        &demos,
        "--library",
        lib.to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(both.status.code(), Some(1));
}
