//! Binary-level tests: stage wiring, exit codes, and output layout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vlk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlk"))
}

fn sample_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_dataset.jsonl")
}

/// Writes a small-model config into `dir` and returns its path.
fn write_config(dir: &Path) -> PathBuf {
    let config = serde_json::json!({
        "model_path": dir.join("model.bin"),
        "dataset_path": sample_dataset(),
        "dimension": "Conservation",
        "tau": 0.03,
        "gamma": 2.0,
        "direction": "PositiveShift",
        "judge": {"kind": "lexical", "n_runs": 3},
        "out_dir": dir.join("out"),
        "seed": 42,
        "parallelism": 2,
        "max_new_tokens": 4,
        "model": {
            "n_layers": 2, "d_model": 16, "n_heads": 2, "d_ff": 24,
            "vocab_size": 257, "max_seq": 1024, "activation": "Gelu", "seed": 42
        }
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn vlk");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("spawn vlk").status.code().unwrap_or(-1)
}

#[test]
fn export_tree_writes_52_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tree.tsv");
    run_ok(vlk().arg("export-tree").arg("--out").arg(&out));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 52);
    assert!(text.starts_with("Openness to Change\tSelf-Direction\tCreativity\tPositive\n"));
}

#[test]
fn full_pipeline_produces_every_stage_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    run_ok(vlk().arg("init-model").arg("--config").arg(&config));
    run_ok(vlk().arg("record").arg("--config").arg(&config));
    run_ok(vlk().arg("locate").arg("--config").arg(&config).arg("--svg"));
    run_ok(vlk().arg("edit-generate").arg("--config").arg(&config));
    run_ok(vlk().arg("evaluate").arg("--config").arg(&config));

    let out = dir.path().join("out");
    for file in [
        "record/profile_plus.csv",
        "record/profile_minus.csv",
        "record/contrast.csv",
        "record/manifest.json",
        "locate/catalog.csv",
        "locate/report.csv",
        "locate/report.svg",
        "locate/manifest.json",
        "edit/policy.json",
        "edit/responses.jsonl",
        "edit/manifest.json",
        "eval/scores.csv",
        "eval/manifest.json",
    ] {
        assert!(out.join(file).is_file(), "missing {file}");
    }

    let scores = std::fs::read_to_string(out.join("eval/scores.csv")).unwrap();
    assert!(scores.starts_with("item_id,dimension,policy,judge,n_runs,score\n"));
    assert_eq!(scores.lines().count(), 1 + 4); // 4 Conservation items
}

#[test]
fn locate_without_record_is_missing_upstream() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    run_ok(vlk().arg("init-model").arg("--config").arg(&config));
    let code = exit_code(vlk().arg("locate").arg("--config").arg(&config));
    assert_eq!(code, 3);
}

#[test]
fn tampered_catalog_is_a_digest_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    run_ok(vlk().arg("init-model").arg("--config").arg(&config));
    run_ok(vlk().arg("record").arg("--config").arg(&config));
    run_ok(vlk().arg("locate").arg("--config").arg(&config));

    let catalog = dir.path().join("out/locate/catalog.csv");
    let mut text = std::fs::read_to_string(&catalog).unwrap();
    text.push_str("9,9,0.9,PositiveValue\n");
    std::fs::write(&catalog, text).unwrap();
    let code = exit_code(vlk().arg("edit-generate").arg("--config").arg(&config));
    assert_eq!(code, 4);
}

#[test]
fn usage_and_config_errors_have_distinct_codes() {
    assert_eq!(exit_code(vlk().arg("no-such-command")), 1);
    assert_eq!(exit_code(&mut vlk()), 1);

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    // invalid tau straight from the flag
    let code =
        exit_code(vlk().arg("record").arg("--config").arg(&config).arg("--tau").arg("1.5"));
    assert_eq!(code, 2);
    // config file that is not JSON
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(exit_code(vlk().arg("record").arg("--config").arg(&bad)), 2);
}

#[test]
fn flag_overrides_win_over_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    run_ok(vlk().arg("init-model").arg("--config").arg(&config));
    run_ok(vlk().arg("record").arg("--config").arg(&config));
    run_ok(
        vlk()
            .arg("locate")
            .arg("--config")
            .arg(&config)
            .arg("--tau")
            .arg("0.5"),
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/locate/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["tau"], serde_json::json!(0.5));
}

#[test]
fn sweeps_emit_long_format_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    run_ok(vlk().arg("init-model").arg("--config").arg(&config));
    run_ok(vlk().arg("record").arg("--config").arg(&config));
    run_ok(vlk().arg("locate").arg("--config").arg(&config));
    run_ok(vlk().arg("sweep-gamma").arg("--config").arg(&config).arg("--svg"));
    run_ok(vlk().arg("sweep-threshold").arg("--config").arg(&config));

    let gamma = std::fs::read_to_string(dir.path().join("out/sweeps/sweep_gamma.csv")).unwrap();
    assert!(gamma.starts_with("param,direction,dimension,score,quality_score,n_neurons_edited\n"));
    assert_eq!(gamma.lines().count(), 1 + 5 * 2); // default grid, both directions
    assert!(dir.path().join("out/sweeps/sweep_gamma.svg").is_file());

    // raising tau never increases the edited-neuron count
    let tau_csv =
        std::fs::read_to_string(dir.path().join("out/sweeps/sweep_threshold.csv")).unwrap();
    let mut last_per_direction = std::collections::BTreeMap::new();
    for line in tau_csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let direction = fields[1].to_string();
        let edited: usize = fields[5].parse().unwrap();
        if let Some(prev) = last_per_direction.get(&direction) {
            assert!(edited <= *prev, "edited count grew with tau: {line}");
        }
        last_per_direction.insert(direction, edited);
    }
}

#[test]
fn synth_bench_fails_cleanly_on_an_impossible_threshold() {
    // tau 0.9 flags nothing at gap 0.5: recall must fail with exit code 6
    let out = vlk()
        .args(["synth-bench", "--seeds", "1", "--tau", "0.9", "--prompts-per-class", "60"])
        .output()
        .expect("spawn vlk");
    assert_eq!(out.status.code(), Some(6));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("criterion failed"), "stderr: {stderr}");
}

#[test]
fn synth_bench_writes_fixture_bundle() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(vlk().args([
        "synth-bench",
        "--seeds",
        "2",
        "--prompts-per-class",
        "120",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert!(dir.path().join("results.csv").is_file());
    for file in
        ["weights.bin", "prompts_plus.txt", "prompts_minus.txt", "ground_truth.csv", "manifest.json"]
    {
        assert!(dir.path().join("fixture-seed0").join(file).is_file(), "missing {file}");
    }
}
