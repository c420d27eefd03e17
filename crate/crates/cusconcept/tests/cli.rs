//! End-to-end runs of the actual binary: subcommands, artifact layout, and
//! the stable exit codes.

mod common;

use std::path::Path;
use std::process::Output;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cusconcept")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

struct Workspace {
    tmp: tempfile::TempDir,
    config_arg: String,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let config = common::write_smoke_config_toml(tmp.path());
        Workspace { tmp, config_arg: config.display().to_string() }
    }

    fn path(&self) -> &Path {
        self.tmp.path()
    }

    fn train(&self, image: &str, extra: &[&str]) -> Output {
        let mut args = vec!["--config", &self.config_arg, "train", image];
        args.extend_from_slice(extra);
        run_in(self.path(), &args)
    }

    fn write_image(&self, name: &str, seed: u64) {
        cusconcept::image_io::save_png(
            &self.path().join(name),
            &common::synthetic_image(seed),
        )
        .unwrap();
    }
}

#[test]
fn train_with_two_axes_yields_three_tokens_and_predictions() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 1);
    let out = ws.train("girl.png", &["--axis", "age", "--axis", "mood", "--out", "b"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("age:"), "{text}");
    assert!(text.contains("mood:"), "{text}");
    assert!(text.contains("object:"), "{text}");

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.path().join("b/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["tokens"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["stage"], 2);
    assert_eq!(manifest["axes"], serde_json::json!(["age", "mood"]));
}

#[test]
fn skip_refinement_writes_a_stage_one_bundle() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 2);
    let out = ws.train("girl.png", &["--axis", "age", "--skip-refinement", "--out", "b1"]);
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.path().join("b1/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["stage"], 1);
}

#[test]
fn zero_axes_without_ablation_flag_is_a_usage_error() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 3);
    let out = ws.train("girl.png", &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_attribute_axes_flag_routes_to_the_open_vocabulary() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 4);
    let out = ws.train("girl.png", &["--no-attribute-axes", "--out", "b2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("attribute:"), "open-set axis is named attribute: {text}");
}

#[test]
fn generate_modes_write_the_declared_layout_deterministically() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 5);
    assert!(ws.train("girl.png", &["--axis", "age", "--out", "b"]).status.success());

    let base = ["--config", ws.config_arg.as_str(), "generate", "b"];
    let o_only: Vec<&str> =
        [&base[..], &["--mode", "o_only", "--count", "2", "--seed", "9", "--out", "g1"]].concat();
    let out = run_in(ws.path(), &o_only);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ws.path().join("g1/b/o_only/9_0.png").is_file());
    assert!(ws.path().join("g1/b/o_only/9_1.png").is_file());
    assert!(ws.path().join("g1/b/o_only/request.json").is_file());

    let again: Vec<&str> =
        [&base[..], &["--mode", "o_only", "--count", "2", "--seed", "9", "--out", "g2"]].concat();
    assert!(run_in(ws.path(), &again).status.success());
    assert_eq!(
        std::fs::read(ws.path().join("g1/b/o_only/9_0.png")).unwrap(),
        std::fs::read(ws.path().join("g2/b/o_only/9_0.png")).unwrap(),
        "fixed seed repeats byte-identically"
    );

    let a_only: Vec<&str> = [&base[..], &["--mode", "a_only", "--out", "g3"]].concat();
    assert!(run_in(ws.path(), &a_only).status.success());
    assert!(ws.path().join("g3/b/a_only/0_0.png").is_file());
}

#[test]
fn recompose_crosses_two_bundles() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 6);
    ws.write_image("house.png", 7);
    assert!(ws.train("girl.png", &["--axis", "age", "--out", "ba"]).status.success());
    assert!(ws.train("house.png", &["--axis", "material", "--out", "bb"]).status.success());

    let out = run_in(
        ws.path(),
        &[
            "--config",
            &ws.config_arg,
            "generate",
            "ba",
            "bb",
            "--mode",
            "recompose",
            "--attr-from",
            "ba",
            "--obj-from",
            "bb",
            "--count",
            "1",
            "--out",
            "gr",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ws.path().join("gr/ba+bb/recompose/0_0.png").is_file());

    // recompose within a single bundle is rejected as a usage error
    let bad = run_in(
        ws.path(),
        &["--config", &ws.config_arg, "generate", "ba", "--mode", "recompose", "--out", "gx"],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn corrupt_bundle_exits_with_the_bundle_code() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 8);
    assert!(ws.train("girl.png", &["--axis", "age", "--out", "b"]).status.success());
    let payload = ws.path().join("b/embeddings.bin");
    let mut bytes = std::fs::read(&payload).unwrap();
    bytes[3] ^= 0x10;
    std::fs::write(&payload, bytes).unwrap();

    let out = run_in(
        ws.path(),
        &["--config", &ws.config_arg, "generate", "b", "--mode", "o_only", "--out", "g"],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn evaluate_smoke_dataset_writes_reports_and_unknown_method_fails() {
    let ws = Workspace::new();
    common::write_smoke_dataset(&ws.path().join("data"));

    let out = run_in(
        ws.path(),
        &["--config", &ws.config_arg, "evaluate", "data", "--method", "ours", "--out", "ev"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(ws.path().join("ev/report_ours.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "header plus two rows:\n{csv}");
    assert!(ws.path().join("ev/aggregates_ours.json").is_file());
    assert!(stdout(&out).contains("method=ours rows=2 failures=0"));

    let bad = run_in(
        ws.path(),
        &["--config", &ws.config_arg, "evaluate", "data", "--method", "nope", "--out", "ev2"],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_hash_mismatch_warns_on_load() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 10);
    assert!(ws.train("girl.png", &["--axis", "age", "--out", "b"]).status.success());

    // same bundle read back under a different configuration
    let out = run_in(
        ws.path(),
        &["--config", &ws.config_arg, "--set", "stage1.steps=11", "predict", "b"],
    );
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning") && stderr.contains("config"), "{stderr}");

    // matching configuration stays silent
    let quiet = run_in(ws.path(), &["--config", &ws.config_arg, "predict", "b"]);
    assert!(!String::from_utf8_lossy(&quiet.stderr).contains("warning"));
}

#[test]
fn predict_prints_ranked_words_and_rejects_untrained_bundles() {
    let ws = Workspace::new();
    ws.write_image("girl.png", 9);
    assert!(ws.train("girl.png", &["--axis", "age", "--out", "b"]).status.success());

    let out = run_in(ws.path(), &["--config", &ws.config_arg, "predict", "b", "--top", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("age:"));
    assert!(text.contains("object:"));
    // 2 axis headers + 3 words each
    assert_eq!(text.lines().count(), 8, "{text}");

    // default top is five
    let out5 = run_in(ws.path(), &["--config", &ws.config_arg, "predict", "b"]);
    assert_eq!(stdout(&out5).lines().count(), 12);

    // a bundle without weight tables cannot answer predictions
    std::fs::remove_file(ws.path().join("b/weight_tables.json")).unwrap();
    let bad = run_in(ws.path(), &["--config", &ws.config_arg, "predict", "b"]);
    assert_eq!(bad.status.code(), Some(7));
}
