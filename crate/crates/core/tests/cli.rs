//! End-to-end runs of the `veritas` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use veritas::data::{load_dataset, make_folds, FoldScheme};

fn veritas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veritas")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a small dataset, folds and config, and trains with a dev fold.
fn trained(dir: &Path) {
    let spec = dir.join("spec.json");
    fs::write(&spec, r#"{"n_trees_per_class": 12, "n_classes": 3, "max_tweets": 4, "seed": 3}"#).unwrap();
    let data = dir.join("data.jsonl");
    let o = veritas(&["synth", "--spec", p(&spec), "--out", p(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let trees = load_dataset(&data).unwrap();
    let folds = make_folds(&trees, FoldScheme::KFold, Some(3), 1).unwrap();
    fs::write(dir.join("folds.json"), folds.to_json().unwrap()).unwrap();
    let config = r#"{
        "training": {"hidden_size": 8, "num_relu_layers": 1, "epochs": 2, "aleatoric_samples": 4},
        "uncertainty": {"n_samples": 5},
        "embedder": {"kind": "hashing", "dimension": 16, "seed": 0},
        "meta": {"backend": "linear_hinge"}
    }"#;
    fs::write(dir.join("config.json"), config).unwrap();
    let out = dir.join("run");
    let o = veritas(&[
        "train",
        "--data",
        p(&data),
        "--folds",
        p(&dir.join("folds.json")),
        "--config",
        p(&dir.join("config.json")),
        "--out",
        p(&out),
        "--dev-fold",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let run = dir.path().join("run");
    for f in ["config.json", "records.csv", "dev_records.csv", "meta.json", "metrics.json", "model_fold1.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let records = run.join("records.csv");

    let o = veritas(&["evaluate", "--records", p(&records), "--classes", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("accuracy"));

    let o = veritas(&["reject", "--records", p(&records), "--mode", "unsup", "--measure", "variation_ratio", "--retain", "0.8"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("measure,retain_fraction"));

    let o = veritas(&["reject", "--records", p(&records), "--mode", "random", "--retain", "0.5", "--seed", "4"]);
    assert!(o.status.success());

    let o = veritas(&["reject", "--records", p(&records), "--mode", "perfold", "--measure", "aleatoric", "--retain", "0.5"]);
    assert!(o.status.success());

    let o = veritas(&["reject", "--records", p(&records), "--mode", "sup", "--meta", p(&run.join("meta.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("n_removed,n_remaining,accuracy,macro_f"));

    let dev = run.join("dev_records.csv");
    let o = veritas(&["calibrate", "--dev", p(&dev), "--test", p(&records), "--measure", "all", "--bins", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 9);

    let o = veritas(&[
        "timeline",
        "--model",
        p(&run.join("model_fold1.json")),
        "--tree",
        "t00000",
        "--data",
        p(&dir.path().join("data.jsonl")),
        "--measure",
        "aleatoric",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn training_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    trained(a.path());
    trained(b.path());
    for f in ["records.csv", "dev_records.csv", "meta.json", "model_fold2.json"] {
        assert_eq!(fs::read(a.path().join("run").join(f)).unwrap(), fs::read(b.path().join("run").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "not,a,records,file\n1,2\n").unwrap();
    assert_eq!(veritas(&["evaluate", "--records", p(&junk), "--classes", "3"]).status.code(), Some(2));
    assert_eq!(veritas(&["evaluate", "--records", p(&dir.path().join("missing.csv")), "--classes", "3"]).status.code(), Some(2));

    trained(dir.path());
    let records = dir.path().join("run/records.csv");
    let cases: [&[&str]; 4] = [
        &["reject", "--records", p(&records), "--mode", "unsup", "--measure", "nonsense", "--retain", "0.8"],
        &["reject", "--records", p(&records), "--mode", "unsup", "--measure", "entropy", "--retain", "1.5"],
        &["reject", "--records", p(&records), "--mode", "unsup", "--retain", "0.8"],
        &["calibrate", "--dev", p(&records), "--test", p(&records), "--measure", "lcs", "--bins", "0"],
    ];
    for args in cases {
        assert_eq!(veritas(args).status.code(), Some(2), "{args:?}");
    }
    let bad_spec = dir.path().join("bad.json");
    fs::write(&bad_spec, r#"{"n_classes": 9}"#).unwrap();
    let o = veritas(&["synth", "--spec", p(&bad_spec), "--out", p(&dir.path().join("x.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
}
