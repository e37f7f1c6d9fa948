//! End-to-end runs of the `pomrec` binary on the bundled fixture.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pomrec::checkpoint::ModelCheckpoint;
use pomrec_core::model::ParamId;
use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini.dat")
}

fn pomrec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pomrec"))
        .current_dir(dir)
        .env_remove("POMREC_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pomrec(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &[&str] = &["--d", "8", "--m", "5", "--k", "2", "--batch", "32", "--lr", "0.01", "--no-clock"];

fn train(dir: &Path, out: &str, epochs: &str, extra: &[&str]) -> String {
    let data = fixture();
    let mut args = vec!["train", "--data", data.to_str().unwrap(), "--out", out, "--epochs", epochs];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(dir, &args)
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pomrec(tmp.path(), &["train", "--out", "x"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--data"));
    assert_eq!(code(&pomrec(tmp.path(), &["train", "--bogus"])), 2);
    assert_eq!(code(&pomrec(tmp.path(), &["--help"])), 0);
}

#[test]
fn train_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = train(tmp.path(), "run", "3", &["--variant", "base"]);
    assert!(stdout.contains("best epoch"), "{stdout}");
    let run = tmp.path().join("run");
    for f in [
        "config.json",
        "state.json",
        "best.json",
        "train_log.csv",
        "test_metrics.json",
        "test_metrics.csv",
        "load_report.json",
        "user_ids.tsv",
        "item_ids.tsv",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let log = fs::read_to_string(run.join("train_log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("epoch,loss,recall5,recall10,recall20,ndcg5,ndcg10,ndcg20,seconds"));
    assert_eq!(lines.count(), 4, "baseline row plus three epochs");

    let config = read_json(&run.join("config.json"));
    assert_eq!(config["model"]["num_prompts"], 0);
    assert_eq!(config["model"]["dispersion_weight"], 0.0);
    let notes: Vec<&str> = config["notes"].as_array().unwrap().iter().map(|n| n.as_str().unwrap()).collect();
    assert!(notes.iter().any(|n| n.starts_with("--variant = base")), "{notes:?}");
    assert!(notes.iter().filter(|n| n.contains("base")).count() >= 3, "variant adjustments noted: {notes:?}");

    let ids = fs::read_to_string(run.join("user_ids.tsv")).unwrap();
    assert!(ids.starts_with("original_id\tdense_id\n"));
    assert_eq!(ids.lines().count(), 41);
}

#[test]
fn eval_is_repeatable_and_checks_the_catalog() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    train(d, "run", "3", &[]);
    let data = fixture();
    let data = data.to_str().unwrap();
    let eval = |out: &str, extra: &[&str]| {
        let mut args = vec!["eval", "--checkpoint", "run/best.json", "--data", data, "--out", out, "--seed", "3"];
        args.extend_from_slice(extra);
        ok(d, &args)
    };
    let first = eval("e1", &[]);
    assert_eq!(first, eval("e2", &[]));
    let json = read_json(&d.join("e1/metrics_test.json"));
    let values: Vec<f64> = ["recall", "ndcg"]
        .iter()
        .flat_map(|key| json[key].as_array().unwrap_or_else(|| panic!("{key} in {json}")).clone())
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 6);
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(
        fs::read(d.join("e1/metrics_test.csv")).unwrap(),
        fs::read(d.join("e2/metrics_test.csv")).unwrap()
    );

    // a 60-item catalog is below the negative count, so sampling takes every item
    eval("full", &["--full-catalog"]);
    let sampled = read_json(&d.join("e1/metrics_test.json"));
    let full = read_json(&d.join("full/metrics_test.json"));
    assert_eq!((&sampled["recall"], &sampled["ndcg"]), (&full["recall"], &full["ndcg"]));

    eval("valid", &["--split", "valid"]);
    assert!(d.join("valid/metrics_valid.json").is_file());

    // a dataset with a different catalog
    let text = fs::read_to_string(fixture()).unwrap();
    let fewer: String = text.lines().filter(|l| !l.contains("::54::")).map(|l| format!("{l}\n")).collect();
    fs::write(d.join("fewer.dat"), fewer).unwrap();
    let out = pomrec(d, &["eval", "--checkpoint", "run/best.json", "--data", "fewer.dat", "--out", "bad"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("items"));
}

#[test]
fn ablate_reports_each_requested_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture();
    let base = ["ablate", "--data", data.to_str().unwrap(), "--d", "4", "--m", "4", "--epochs", "1", "--batch", "64", "--seeds", "2"];
    ok(tmp.path(), &[&base[..], &["--out", "all"]].concat());
    let table = fs::read_to_string(tmp.path().join("all/ablation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "variant,recall5,recall10,ndcg5,ndcg10");
    assert_eq!(rows.len(), 5);
    assert_eq!(fs::read_to_string(tmp.path().join("all/ablation_runs.csv")).unwrap().lines().count(), 9);

    ok(tmp.path(), &[&base[..], &["--out", "two", "--variants", "base,full"]].concat());
    let table = fs::read_to_string(tmp.path().join("two/ablation.csv")).unwrap();
    let variants: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(variants, ["base", "full"]);
    assert!(tmp.path().join("two/full-seed1/best.json").is_file());
}

#[test]
fn synth_writes_a_world_and_reports_purity() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--users", "60", "--items", "60", "--pool-size", "20", "--out", "w"]);
    let truth = read_json(&d.join("w/ground_truth.json"));
    assert!(truth.is_object());
    let lines = fs::read_to_string(d.join("w/dataset.dat")).unwrap();
    assert!(lines.lines().all(|l| l.split("::").count() == 4));
    assert!(!d.join("w/recovery.json").exists());

    let stdout = ok(
        d,
        &["synth", "--users", "60", "--items", "60", "--pool-size", "20", "--report", "--epochs", "2", "--no-clock", "--out", "r"],
    );
    let purity_line = stdout.lines().find(|l| l.starts_with("purity ")).expect("purity line");
    assert!(purity_line.ends_with("window items"), "{purity_line}");
    let recovery = read_json(&d.join("r/recovery.json"));
    let purity = recovery["purity"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&purity));

    let out = pomrec(d, &["synth", "--items", "50", "--pool-size", "20", "--interests", "3", "--out", "bad"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pool 2"), "{}", String::from_utf8_lossy(&out.stderr));

    let out = pomrec(d, &["synth", "--report", "--k", "2", "--interests", "3", "--out", "bad"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn export_shapes_and_degenerate_users() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // user 999 repeats one item; without prompts its window rows are identical
    let mut text = fs::read_to_string(fixture()).unwrap();
    for t in 0..8 {
        text.push_str(&format!("999::54::5::{}\n", 990_000_000 + t));
    }
    fs::write(d.join("data.dat"), text).unwrap();
    ok(d, &["train", "--data", "data.dat", "--d", "6", "--m", "5", "--k", "3", "--np", "0", "--epochs", "1", "--out", "run", "--no-clock"]);
    ok(
        d,
        &["export-embeddings", "--checkpoint", "run/best.json", "--data", "data.dat", "--users", "0,1,999", "--out", "x"],
    );
    let items = fs::read_to_string(d.join("x/item_embeddings.csv")).unwrap();
    let mut rows = items.lines();
    assert_eq!(rows.next(), Some("item,e0,e1,e2,e3,e4,e5"));
    assert_eq!(rows.clone().count(), 60);
    assert!(rows.all(|r| r.split(',').count() == 7));

    let interests = fs::read_to_string(d.join("x/user_interests.csv")).unwrap();
    let rows: Vec<Vec<&str>> = interests.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 2 * 3);
    for user in ["0", "1", "999"] {
        assert_eq!(rows.iter().filter(|r| r[0] == user).count(), 6);
    }
    // positional embeddings still separate the repeated rows here
    let sigma = |rows: &[Vec<&str>]| -> f64 {
        rows.iter()
            .filter(|r| r[0] == "999" && r[1] == "dispersion")
            .flat_map(|r| r[3..].iter().map(|v| v.parse::<f64>().unwrap().abs()))
            .fold(0.0, f64::max)
    };
    assert!(sigma(&rows) > 0.0);

    // with them zeroed the window rows coincide and the dispersion vanishes
    let mut ckpt = ModelCheckpoint::load(&d.join("run/best.json")).unwrap();
    ckpt.params.get_mut(ParamId::PositionalEmbeddings).data_mut().fill(0.0);
    ckpt.save(&d.join("flat.json")).unwrap();
    ok(d, &["export-embeddings", "--checkpoint", "flat.json", "--data", "data.dat", "--users", "999", "--out", "flat"]);
    let interests = fs::read_to_string(d.join("flat/user_interests.csv")).unwrap();
    let rows: Vec<Vec<&str>> = interests.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(sigma(&rows) < 1e-12, "{rows:?}");

    let out = pomrec(d, &["export-embeddings", "--checkpoint", "run/best.json", "--data", "data.dat", "--users", "nobody", "--out", "y"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nobody"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("c.json"),
        r#"{"model": {"num_interests": 4, "embedding_dim": 6, "hidden_dim": 12, "seq_len": 4}, "train": {"max_epochs": 1, "seed": 11}}"#,
    )
    .unwrap();
    let data = fixture();
    ok(d, &["train", "--config", "c.json", "--data", data.to_str().unwrap(), "--k", "3", "--out", "run", "--no-clock"]);
    let config = read_json(&d.join("run/config.json"));
    assert_eq!(config["model"]["num_interests"], 3);
    assert_eq!(config["model"]["embedding_dim"], 6);
    assert_eq!(config["train"]["seed"], 11);
    let notes = config["notes"].to_string();
    assert!(notes.contains("--k = 3 (was 4)"), "{notes}");

    fs::write(d.join("bad.json"), r#"{"model": {"interests": 4}}"#).unwrap();
    let out = pomrec(d, &["train", "--config", "bad.json", "--data", data.to_str().unwrap(), "--out", "bad"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn resumed_training_matches_a_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    train(d, "straight", "4", &[]);
    train(d, "part", "2", &[]);
    fs::copy(d.join("part/state.json"), d.join("resume.json")).unwrap();
    train(d, "part", "4", &["--resume", "resume.json"]);
    for f in ["best.json", "train_log.csv", "test_metrics.json", "state.json"] {
        assert_eq!(fs::read(d.join("straight").join(f)).unwrap(), fs::read(d.join("part").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pomrec"))
        .current_dir(tmp.path())
        .env("POMREC_OUT_DIR", tmp.path().join("root"))
        .args(["synth", "--users", "20", "--items", "60", "--pool-size", "20"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("root/synth/dataset.dat").is_file());

    ok(tmp.path(), &["synth", "--users", "20", "--items", "60", "--pool-size", "20"]);
    assert!(tmp.path().join("runs/synth/dataset.dat").is_file());
}
