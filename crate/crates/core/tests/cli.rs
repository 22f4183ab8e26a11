mod common;

use std::path::Path;
use std::process::{Command, Output};

fn docground(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docground"))
        .args(args)
        .env_remove("GROUND_STOPWORDS")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ground_writes_one_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pred.json");
    let layout = common::fixture("doc_small.json");
    let o = docground(&[
        "ground",
        "--layout",
        path(&layout),
        "--question",
        "What is the circular number?",
        "--answer",
        "Circular No. 17/2024",
        "--question-id",
        "doc_small.q0",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(written, common::read_fixture("pred_small.json"));
    let recs = docground::records::parse_predictions(&written).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].blocks[0].id, "b0");
}

#[test]
fn eval_ablate_round() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let o = docground(&["synth", "--out", path(&corpus), "--n-docs", "6", "--noise", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["gt.json", "manifest.json", "layouts/doc_0000.json"] {
        assert!(corpus.join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(corpus.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["layouts"].as_array().unwrap().len(), 6);

    let gt = corpus.join("gt.json");
    let preds = tmp.path().join("preds.json");
    let o = docground(&["ground", "-l", path(&corpus), "-q", path(&gt), "-o", path(&preds)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let report = tmp.path().join("report.csv");
    let o = docground(&[
        "eval",
        "--pred",
        path(&preds),
        "--gt",
        path(&gt),
        "--iou",
        "0.5",
        "--out",
        path(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&report).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "granularity,precision,recall,f1,tp,n_pred,n_gt");
    assert_eq!(rows.len(), 5);
    assert!(rows[2].starts_with("line,100.00,100.00,100.00,"));

    let o = docground(&[
        "eval",
        "--pred",
        path(&preds),
        "--gt",
        path(&gt),
        "--granularity",
        "word",
    ]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 2);
    assert!(stdout.lines().nth(1).unwrap().starts_with("word,"));

    let o = docground(&[
        "eval",
        "--pred",
        path(&preds),
        "--gt",
        path(&gt),
        "--point-mode",
        "distance",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = docground(&[
        "eval",
        "--pred",
        path(&preds),
        "--gt",
        path(&gt),
        "--point-mode",
        "distance",
        "--page-size",
        "1240x1754",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let table = tmp.path().join("t5.csv");
    let o = docground(&[
        "ablate",
        "--corpus",
        path(&corpus),
        "--gt",
        path(&gt),
        "--param",
        "max-lines",
        "--values",
        "1:10",
        "--out",
        path(&table),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "value,precision,recall,f1,best");
    assert_eq!(lines.len(), 11);
    let recalls: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(recalls.windows(2).all(|w| w[0] <= w[1]), "{recalls:?}");

    let o = docground(&[
        "ablate",
        "--corpus",
        path(&corpus),
        "--gt",
        path(&gt),
        "--param",
        "max-blocks",
        "--values",
        "1:5",
    ]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 6);

    let o = docground(&[
        "ablate",
        "--corpus",
        path(&corpus),
        "--gt",
        path(&gt),
        "--param",
        "max-lines",
        "--values",
        "3,2",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_violations_by_id() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    let raw = common::read_fixture("doc_small.json").replacen("[60, 80, 160, 100]", "[60, 80, 160, 107]", 1);
    assert_ne!(raw, common::read_fixture("doc_small.json"));
    std::fs::write(&bad, raw).unwrap();
    let o = docground(&["validate", "--layout", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("b0.l0.w0: containment (5)"), "{out}");

    let o = docground(&["validate", "--layout", path(&common::fixture("doc_small.json"))]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("ok (3 blocks, 7 lines, 41 words)"));
}

#[test]
fn validate_writes_canonical_form() {
    let tmp = tempfile::tempdir().unwrap();
    let compact = tmp.path().join("compact.json");
    let doc: serde_json::Value = serde_json::from_str(&common::read_fixture("doc_multiblock.json")).unwrap();
    std::fs::write(&compact, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = tmp.path().join("canonical.json");
    let o = docground(&["validate", "-l", path(&compact), "-o", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(out).unwrap(),
        common::read_fixture("doc_multiblock.json")
    );
}

#[test]
fn render_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o.svg");
    let o = docground(&[
        "render",
        "-l",
        path(&common::fixture("doc_small.json")),
        "--pred",
        path(&common::fixture("pred_small.json")),
        "-o",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/doc_small.svg");
    assert_eq!(
        std::fs::read_to_string(out).unwrap(),
        std::fs::read_to_string(golden).unwrap()
    );
}

#[test]
fn usage_and_input_errors_exit_1() {
    assert_eq!(docground(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(docground(&["ground", "--bogus"]).status.code(), Some(1));
    let layout = common::fixture("doc_small.json");
    let o = docground(&["ground", "-l", path(&layout)]);
    assert_eq!(o.status.code(), Some(1), "--answer is required");
    let o = docground(&["ground", "-l", path(&layout), "--answer", " ,; "]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty"));
    let o = docground(&["ground", "-l", "/nonexistent/x.json", "--answer", "a"]);
    assert_eq!(o.status.code(), Some(1));
    let o = docground(&["ground", "-l", path(&layout), "--answer", "a", "--threshold", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let o = docground(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8(o.stdout).unwrap();
    for sub in ["ground", "eval", "ablate", "synth", "render", "validate"] {
        assert!(help.contains(sub), "{sub}");
    }
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"max_blocks": 1, "threshold": 0.5}"#).unwrap();
    let layout = common::fixture("doc_multiblock.json");
    let run = |extra: &[&str]| {
        let mut args = vec![
            "ground",
            "-l",
            path(&layout),
            "--answer",
            "Regional Office New Delhi",
            "--config",
            path(&cfg),
        ];
        args.extend_from_slice(extra);
        let o = docground(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        docground::records::parse_predictions(&String::from_utf8(o.stdout).unwrap())
            .unwrap()
            .remove(0)
    };
    let one = run(&[]);
    assert_eq!(one.blocks.len(), 1);
    assert_eq!(one.config.threshold, 0.5);
    let two = run(&["--max-blocks", "2"]);
    assert_eq!(two.blocks.len(), 2);

    std::fs::write(&cfg, r#"{"no_such_field": 1}"#).unwrap();
    let o = docground(&["ground", "-l", path(&layout), "--answer", "x", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stopword_file_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let words = tmp.path().join("stop.txt");
    std::fs::write(&words, "# custom\nregional\noffice\n").unwrap();
    let layout = common::fixture("doc_multiblock.json");
    let o = Command::new(env!("CARGO_BIN_EXE_docground"))
        .args(["ground", "-l", path(&layout), "--answer", "Regional Office"])
        .env("GROUND_STOPWORDS", &words)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let rec = docground::records::parse_predictions(&String::from_utf8(o.stdout).unwrap())
        .unwrap()
        .remove(0);
    let list: Vec<String> = rec.config.stopwords.clone().into();
    assert_eq!(list, ["office", "regional"]);

    let o = Command::new(env!("CARGO_BIN_EXE_docground"))
        .args(["ground", "-l", path(&layout), "--answer", "x"])
        .env("GROUND_STOPWORDS", tmp.path().join("missing.txt"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inputs_are_not_modified() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = tmp.path().join("d.json");
    std::fs::copy(common::fixture("doc_small.json"), &layout).unwrap();
    let before = std::fs::read(&layout).unwrap();
    let o = docground(&["validate", "-l", path(&layout), "-o", path(&layout)]);
    assert!(o.status.success());
    let o = docground(&["ground", "-l", path(&layout), "--answer", "Finance"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&layout).unwrap(), before);
}
