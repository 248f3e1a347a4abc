#[path = "../../core/tests/common/fixture.rs"]
mod fixture;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use targen_core::engine::{patched_digest, FixtureEntry, Prediction, RawCandidate, ReplayLog, WireRequest, WireResponse};
use targen_core::metrics::EvalReport;
use targen_core::prompt::PromptRecord;
use targen_core::{load_dataset, read_jsonl, write_jsonl};

const PASS: &str = "[INFO] Tests run: 1, Failures: 0, Errors: 0, Skipped: 0\n[INFO] BUILD SUCCESS";

fn targen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_targen")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = targen(args);
    assert!(out.status.success(), "targen {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn mine_encode_repair_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let repo = d.join("shop");
    fs::create_dir(&repo).unwrap();
    fixture::fixture_repo(&repo);

    let mined = d.join("mined.jsonl");
    let out = ok(&["mine", "--repo", p(&repo), "--out", p(&mined)]);
    assert!(out.contains("mined=5 kept=3"), "{out}");
    let excl = csv_rows(&d.join("mined.jsonl.exclusions.csv"));
    assert_eq!(excl[0], ["id", "commit", "reason", "detail"]);
    assert_eq!(excl.len(), 3);
    let data = load_dataset(&mined).unwrap();
    assert_eq!(data.len(), 3);

    let out = ok(&["split", "--in", p(&mined), "--ratios", "80,5,15", "--out-dir", p(&d.join("split"))]);
    let parts: usize = ["train", "val", "test"].iter().map(|s| load_dataset(d.join("split").join(format!("{s}.jsonl"))).unwrap().len()).sum();
    assert!(out.contains("dropped_trivial="), "{out}");
    assert!((2..=3).contains(&parts), "{out}");

    let prompts = d.join("prompts.jsonl");
    ok(&["encode", "--io", "io2", "--in", p(&mined), "--out", p(&prompts)]);
    let records: Vec<PromptRecord> = read_jsonl(&prompts).unwrap();
    assert_eq!(records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), data.iter().map(|i| i.id.as_str()).collect::<Vec<_>>());

    let fixtures: Vec<FixtureEntry> = records
        .iter()
        .map(|r| FixtureEntry {
            request: WireRequest { input: r.input.clone(), beam_size: 2, max_new_tokens: 256 },
            response: WireResponse {
                candidates: vec![
                    RawCandidate { text: "fail();".into(), score: -0.5 },
                    RawCandidate { text: r.expected_output.clone(), score: -1.0 },
                ],
            },
        })
        .collect();
    let fixture_file = d.join("fixtures.jsonl");
    write_jsonl(&fixtures, &fixture_file).unwrap();
    let logs: Vec<ReplayLog> = data.iter().map(|i| ReplayLog { digest: patched_digest(&i.repaired_test.source), log: PASS.into() }).collect();
    let log_file = d.join("logs.jsonl");
    write_jsonl(&logs, &log_file).unwrap();

    let preds = d.join("preds.jsonl");
    let rec = d.join("recorded.jsonl");
    let args = ["repair", "--io", "io2", "--dataset", p(&mined), "--beam", "2", "--logs", p(&log_file)];
    let out = ok(&[&args[..], &["--backend", p(&fixture_file), "--out", p(&preds), "--record", p(&rec)]].concat());
    assert!(out.contains("repaired 3 of 3 instances, 3 plausible"), "{out}");
    let got: Vec<Prediction> = read_jsonl(&preds).unwrap();
    assert!(got.iter().all(|p| p.candidates.len() == 2));

    let report = d.join("report.json");
    ok(&["evaluate", "--predictions", p(&preds), "--dataset", p(&mined), "--out", p(&report)]);
    let r: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((r.n, r.em, r.pr), (3, 100.0, 100.0));
    assert!(r.rows.iter().all(|row| row.best_rank == Some(2)));

    let replayed = d.join("replayed.jsonl");
    ok(&[&args[..], &["--backend", p(&rec), "--out", p(&replayed)]].concat());
    assert_eq!(fs::read(&preds).unwrap(), fs::read(&replayed).unwrap());

    let cats = d.join("categories.csv");
    ok(&["categorize", "--dataset", p(&mined), "--out", p(&cats)]);
    let rows = csv_rows(&cats);
    assert_eq!(rows[0], ["id", "categories", "ast_edits", "breakage_kind"]);
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| ["ARG", "INV", "ORC", "OTH"].iter().any(|c| r[1].contains(c))));

    let feats = d.join("features.csv");
    ok(&["features", "--dataset", p(&mined), "--report", p(&report), "--out", p(&feats)]);
    let rows = csv_rows(&feats);
    assert_eq!(rows[0].len(), 10);
    assert_eq!(&rows[0][8..], ["em", "plausible"]);
    assert!(rows[1..].iter().all(|r| r[8] == "1" && r[9] == "1"));
}

#[test]
fn trust_model_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let train = d.join("features.csv");
    let mut w = csv::Writer::from_path(&train).unwrap();
    w.write_record(["id", "max_tfidf_sim", "avg_tfidf_sim", "common_ast_hunk", "common_ast_node", "changed_files", "changed_lines", "test_loc", "em", "plausible"]).unwrap();
    for i in 0..40 {
        let em = i % 2 == 0;
        let sim = if em { 0.9 } else { 0.1 };
        let row = [format!("r{i}"), sim.to_string(), sim.to_string(), "1".into(), "2".into(), (i % 5).to_string(), "7".into(), "12".into(), (em as u8).to_string(), "1".into()];
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();

    let model = d.join("model.json");
    let report = d.join("trust.json");
    ok(&["predict-trust", "--train", p(&train), "--labels", "em", "--cv", "5", "--seed", "7", "--trees", "20", "--model", p(&model), "--out", p(&report)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["cv"]["positive"]["f1"], 100.0);
    assert_eq!(v["rows"], 40);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["version"], 1);
    assert_eq!(m["tokenizer"], "punct-v1");

    let again = d.join("model2.json");
    ok(&["predict-trust", "--train", p(&train), "--labels", "em", "--seed", "7", "--trees", "20", "--model", p(&again), "--out", p(&d.join("t2.json"))]);
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());

    let scored = d.join("scored.csv");
    ok(&["apply-trust", "--model", p(&model), "--features", p(&train), "--out", p(&scored)]);
    let rows = csv_rows(&scored);
    assert_eq!(rows.len(), 41);
    assert!(rows[1..].iter().enumerate().all(|(i, r)| r[2] == (i % 2 == 0).to_string()));

    let out = targen(&["predict-trust", "--train", p(&train), "--labels", "plausible", "--out", p(&d.join("t3.json"))]);
    assert!(!out.status.success());
}

#[test]
fn bad_input_exits_nonzero() {
    let out = targen(&["evaluate", "--predictions", "/nonexistent/p.jsonl", "--dataset", "/nonexistent/d.jsonl", "--out", "/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    let out = targen(&["split", "--in", "x.jsonl", "--ratios", "80,10,15"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum to 100"));
}
