use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/yeast_style.svm")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slacksvm"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let out = path_str(&out);
    let fx = fixture();
    let fx = path_str(&fx);
    for args in [
        vec!["train", "--data", fx, "--strategy", "bogus", "--out", out],
        vec!["train", "--data", fx, "--objective", "hinge", "--out", out],
        vec!["train", "--data", fx, "--c", "-1", "--out", out],
        vec!["train", "--data", fx, "--stop-ratio", "1.5", "--out", out],
        vec!["train", "--out", out],
        vec!["search-bench", "--strategies", "angular,nope"],
        vec!["search-bench", "--instances", "0"],
        vec!["search-bench", "--ensemble", "multilabel", "--labels", "30"],
        vec!["adversarial-demo", "--eps", "0.9"],
        vec!["emit-points"],
        vec!["no-such-command"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?} printed no usage message");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.svm");
    fs::write(&bad, "#dims=2,2\n0 5:1\n").unwrap();
    let out = dir.path().join("m");
    for data in [dir.path().join("missing.svm"), bad] {
        let o = run(&["train", "--data", path_str(&data), "--out", path_str(&out)]);
        assert_eq!(o.status.code(), Some(1));
    }
    // A chain checkpoint cannot emit multi-label points.
    ok(&[
        "train",
        "--synthetic",
        "chain",
        "--examples",
        "5",
        "--epochs",
        "1",
        "--out",
        path_str(&out),
    ]);
    let model = out.join("model.json");
    let fx = fixture();
    let o = run(&[
        "emit-points",
        "--model",
        path_str(&model),
        "--data",
        path_str(&fx),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_epochs_write_the_initial_model_and_an_empty_history() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture();
    ok(&[
        "train",
        "--data",
        path_str(&fx),
        "--epochs",
        "0",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(
        fs::read_to_string(dir.path().join("history.jsonl")).unwrap(),
        ""
    );
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    let w = model["model"]["w"].as_array().unwrap();
    assert_eq!(w.len(), 14 * 25);
    assert!(w.iter().all(|v| v.as_f64() == Some(0.0)));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["test"]["examples"], 40);
    assert_eq!(metrics["train"]["examples"], 120);
}

#[test]
fn slack_and_margin_training_both_emit_histories() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture();
    for objective in ["slack", "margin"] {
        let out = dir.path().join(objective);
        ok(&[
            "train",
            "--data",
            path_str(&fx),
            "--objective",
            objective,
            "--epochs",
            "4",
            "--out",
            path_str(&out),
        ]);
        let history = fs::read_to_string(out.join("history.jsonl")).unwrap();
        let records: Vec<serde_json::Value> = history
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(records.len(), 4);
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r["epoch"], i + 1);
            assert!(r["objective"].as_f64().unwrap().is_finite());
            assert!(r.get("seconds").is_none());
        }
        let metrics: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
        let acc = metrics["test"]["report"]["acc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn every_trainer_and_task_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (synthetic, trainer) in [
        ("separable", "cutting-plane"),
        ("chain", "sgd"),
        ("chain", "cutting-plane"),
        ("hierarchy", "sgd"),
        ("yeast", "sgd"),
    ] {
        let out = dir.path().join(format!("{synthetic}-{trainer}"));
        ok(&[
            "train",
            "--synthetic",
            synthetic,
            "--trainer",
            trainer,
            "--examples",
            "20",
            "--epochs",
            "3",
            "--max-rounds",
            "5",
            "--timing",
            "--out",
            path_str(&out),
        ]);
        let history = fs::read_to_string(out.join("history.jsonl")).unwrap();
        assert!(!history.is_empty(), "{synthetic} {trainer}");
        let first: serde_json::Value =
            serde_json::from_str(history.lines().next().unwrap()).unwrap();
        assert!(first["seconds"].as_f64().is_some());
    }
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        ok(&[
            "train",
            "--data",
            path_str(&fx),
            "--epochs",
            "3",
            "--seed",
            "5",
            "--out",
            path_str(&out),
        ]);
        let csv = out.join("bench.csv");
        ok(&[
            "search-bench",
            "--ensemble",
            "planted",
            "--instances",
            "30",
            "--seed",
            "9",
            "--csv",
            path_str(&csv),
        ]);
        let files: Vec<Vec<u8>> = ["model.json", "history.jsonl", "metrics.json", "bench.csv"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn threads_do_not_change_the_history() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture();
    let mut histories = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        ok(&[
            "train",
            "--data",
            path_str(&fx),
            "--epochs",
            "2",
            "--threads",
            threads,
            "--out",
            path_str(&out),
        ]);
        histories.push(fs::read_to_string(out.join("history.jsonl")).unwrap());
    }
    assert_eq!(histories[0], histories[1]);
}

#[test]
fn adversarial_bench_separates_angular_from_the_rest() {
    let csv = ok(&[
        "search-bench",
        "--ensemble",
        "adversarial",
        "--instances",
        "20",
        "--csv",
        "-",
    ]);
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    for row in rdr.records() {
        let row = row.unwrap();
        let exact: f64 = row[3].parse().unwrap();
        if &row[0] == "angular" {
            assert_eq!(exact, 1.0);
        } else {
            assert_eq!(exact, 0.0, "{}", &row[0]);
        }
    }
}

#[test]
fn single_label_ensemble_is_solved_by_everyone() {
    let csv = ok(&[
        "search-bench",
        "--labels",
        "1",
        "--instances",
        "25",
        "--csv",
        "-",
    ]);
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    for row in rdr.records() {
        let row = row.unwrap();
        assert_eq!(&row[2], "1", "{}", &row[0]);
        assert_eq!(&row[3], "1", "{}", &row[0]);
    }
}

#[test]
fn demo_reports_the_gap() {
    let text = ok(&["adversarial-demo"]);
    let angular = text.lines().find(|l| l.starts_with("angular")).unwrap();
    assert!(angular.contains("2.500000e-1"), "{angular}");
    assert!(text.contains("250.0x"));
}

#[test]
fn emitted_points_cover_the_label_space() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture();
    ok(&[
        "train",
        "--data",
        path_str(&fx),
        "--epochs",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    let model = dir.path().join("model.json");
    let csv = dir.path().join("points.csv");
    ok(&[
        "emit-points",
        "--model",
        path_str(&model),
        "--data",
        path_str(&fx),
        "--index",
        "7",
        "--out",
        path_str(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + (1 << 14) - 1);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2).unwrap() != "0"));
    let with_gold = ok(&[
        "emit-points",
        "--model",
        path_str(&model),
        "--data",
        path_str(&fx),
        "--include-gold",
    ]);
    assert_eq!(with_gold.lines().count(), 1 + (1 << 14));

    let three = ok(&["emit-points", "--adversarial", "1e-3"]);
    assert_eq!(
        three,
        "label,h,g,phi\n0,0.001,1,0.001\n1,1,0.001,0.001\n2,0.5,0.5,0.25\n"
    );
}
