use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_CONFIG: &str = "bilstm_hidden = 8\ntype_embedding_dim = 4\nfeature_embedding_dim = 4\nfc_sizes = [16]\nepochs = 2\n";

fn etcoref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etcoref"))
        .args(args)
        .env_remove("ETCOREF_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = etcoref(args);
    assert!(
        out.status.success(),
        "etcoref {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a command expected to fail and returns the structured error.
fn failure(args: &[&str]) -> Value {
    let out = etcoref(args);
    assert!(!out.status.success(), "etcoref {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("unstructured error output: {stderr}"))
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// A synthetic corpus of `docs` documents with its type sidecar and a
    /// small training config.
    fn new(docs: usize) -> Self {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        ok(&[
            "synth-corpus",
            "--documents",
            &docs.to_string(),
            "--seed",
            "4",
            "-o",
            ws.s("corpus.conll"),
            "--types-out",
            ws.s("types.jsonl"),
        ]);
        fs::write(ws.p("small.toml"), SMALL_CONFIG).unwrap();
        ws
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> &'static str {
        Box::leak(self.p(name).to_string_lossy().into_owned().into_boxed_str())
    }

    fn train(&self, variant: &str, checkpoint: &str) {
        ok(&[
            "train",
            "--train",
            self.s("corpus.conll"),
            "--types",
            self.s("types.jsonl"),
            "--variant",
            variant,
            "--synth-dim",
            "8",
            "--config",
            self.s("small.toml"),
            "--seed",
            "3",
            "--checkpoint",
            self.s(checkpoint),
        ]);
    }
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn score_identical_corpora_renders_full_marks() {
    let ws = Workspace::new(4);
    let corpus = ws.s("corpus.conll");
    let table = ok(&["score", "--key", corpus, "--response", corpus, "--types", ws.s("types.jsonl")]);
    let all = table.lines().find(|l| l.starts_with("all")).unwrap();
    let cells: Vec<&str> = all.split_whitespace().collect();
    assert_eq!(&cells[1..5], ["100.00"; 4], "{table}");
    assert_eq!(cells[5], "0");

    let json: Value = serde_json::from_str(&ok(&["score", "--key", corpus, "--response", corpus, "--json", "--by-genre"])).unwrap();
    for metric in ["muc", "b_cubed", "ceaf_e"] {
        assert_eq!(json[metric]["f1"], 1.0);
    }
    assert_eq!(json["documents"], 4);
    assert!(json["genres"].as_object().is_some_and(|g| !g.is_empty()));
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let ws = Workspace::new(6);
    ws.train("et_full", "a.ckpt");
    ws.train("et_full", "b.ckpt");
    assert_eq!(read(&ws.p("a.ckpt")), read(&ws.p("b.ckpt")));

    let manifest: Value = serde_json::from_slice(&read(&ws.p("a.ckpt.manifest.json"))).unwrap();
    assert_eq!(manifest["variant"], "et_full");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["bilstm_hidden"], 8);

    ok(&["train", "--replay", ws.s("a.ckpt.manifest.json"), "--checkpoint", ws.s("c.ckpt")]);
    assert_eq!(read(&ws.p("a.ckpt")), read(&ws.p("c.ckpt")));
    assert!(ws.p("c.ckpt.manifest.json").exists());

    ws.train("baseline", "d.ckpt");
    assert_ne!(read(&ws.p("a.ckpt")), read(&ws.p("d.ckpt")));
}

#[test]
fn train_resolve_score_pipeline() {
    let ws = Workspace::new(6);
    ws.train("et_full", "m.ckpt");
    let resolve = |out: &str| {
        ok(&[
            "resolve",
            "--checkpoint",
            ws.s("m.ckpt"),
            ws.s("corpus.conll"),
            "--types",
            ws.s("types.jsonl"),
            "--synth-dim",
            "8",
            "-o",
            ws.s(out),
        ])
    };
    resolve("r1.conll");
    resolve("r2.conll");
    assert_eq!(read(&ws.p("r1.conll")), read(&ws.p("r2.conll")));
    let json: Value = serde_json::from_str(&ok(&[
        "score",
        "--key",
        ws.s("corpus.conll"),
        "--response",
        ws.s("r1.conll"),
        "--types",
        ws.s("types.jsonl"),
        "--json",
    ]))
    .unwrap();
    let avg = json["avg_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&avg));

    // the typed checkpoint refuses a corpus typed in another scheme
    let err = failure(&[
        "resolve",
        "--checkpoint",
        ws.s("m.ckpt"),
        ws.s("corpus.conll"),
        "--scheme",
        "ontonotes-orig",
        "--synth-dim",
        "8",
        "-o",
        ws.s("r3.conll"),
    ]);
    assert_eq!(err["error"]["kind"], "invalid_input", "{err}");
    assert!(err["error"]["message"].as_str().unwrap().contains("trained on scheme `common`"), "{err}");
}

#[test]
fn grid_summarizes_two_variants() {
    let ws = Workspace::new(8);
    ok(&["synth-corpus", "--documents", "4", "--seed", "9", "-o", ws.s("test.conll"), "--types-out", ws.s("test_types.jsonl")]);
    // both corpora carry their types inline so one sidecar never meets the other's ids
    ok(&["convert", ws.s("corpus.conll"), "--types", ws.s("types.jsonl"), "-o", ws.s("train.jsonl")]);
    ok(&["convert", ws.s("test.conll"), "--types", ws.s("test_types.jsonl"), "-o", ws.s("test.jsonl")]);
    fs::write(ws.p("grid.toml"), "variants = [\"baseline\", \"et_full\"]\nseeds = [1, 2]\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_etcoref"))
        .args([
            "grid",
            ws.s("grid.toml"),
            "--train",
            ws.s("train.jsonl"),
            "--test",
            ws.s("test.jsonl"),
            "--synth-dim",
            "8",
            "--config",
            ws.s("small.toml"),
        ])
        .env("ETCOREF_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty(), "unexpected warnings");
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[0].contains("#IC") && lines[0].contains("p"));
    assert!(lines[1].starts_with("baseline") && lines[1].trim_end().ends_with('-'));
    assert!(lines[2].starts_with("et_full"));
    let p: f64 = lines[2].split_whitespace().last().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn fold_grid_as_json() {
    let ws = Workspace::new(6);
    fs::write(ws.p("grid.json"), r#"{"variants": ["et_cross"], "folds": 3, "scheme": "common"}"#).unwrap();
    let json: Value = serde_json::from_str(&ok(&[
        "grid",
        ws.s("grid.json"),
        "--train",
        ws.s("corpus.conll"),
        "--types",
        ws.s("types.jsonl"),
        "--synth-dim",
        "8",
        "--config",
        ws.s("small.toml"),
        "--json",
    ]))
    .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 1);
    assert_eq!(json["rows"][0]["replicates"], 3);
    let tested: u64 = json["runs"].as_array().unwrap().iter().map(|r| r["report"]["documents"].as_u64().unwrap()).sum();
    assert_eq!(tested, 6);
}

#[test]
fn predict_types_end_to_end() {
    let ws = Workspace::new(10);
    ok(&["synth-store", ws.s("corpus.conll"), "--dim", "16", "--marked", "-o", ws.s("marked.cte1")]);
    let table = ok(&[
        "predict-types",
        ws.s("corpus.conll"),
        "--types",
        ws.s("types.jsonl"),
        "--vectors",
        ws.s("marked.cte1"),
        "--epochs",
        "3",
        "-o",
        ws.s("pred.jsonl"),
        "--report",
        ws.s("report.json"),
    ]);
    assert!(table.contains("macro F1") && table.contains("PRP (dem.)"), "{table}");
    let gold = fs::read_to_string(ws.p("types.jsonl")).unwrap().lines().count();
    let predicted = fs::read_to_string(ws.p("pred.jsonl")).unwrap();
    assert_eq!(predicted.lines().count(), gold);
    let report: Value = serde_json::from_slice(&read(&ws.p("report.json"))).unwrap();
    assert_eq!(report["missing"], 0);

    // the predicted sidecar drives a grid with predicted types
    fs::write(
        ws.p("grid.toml"),
        format!(
            "variants = [\"et_self\"]\nfolds = 2\ntype_source = \"predicted\"\npredicted_sidecar = {:?}\n",
            ws.s("pred.jsonl")
        ),
    )
    .unwrap();
    ok(&["grid", ws.s("grid.toml"), "--train", ws.s("corpus.conll"), "--synth-dim", "8", "--config", ws.s("small.toml")]);
}

#[test]
fn convert_and_mark() {
    let ws = Workspace::new(3);
    ok(&["convert", ws.s("corpus.conll"), "--types", ws.s("types.jsonl"), "-o", ws.s("c.jsonl")]);
    let first: Value = serde_json::from_str(fs::read_to_string(ws.p("c.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["mentions"][0]["entity_type"].is_string());
    ok(&["convert", ws.s("c.jsonl"), "-o", ws.s("back.conll"), "--sidecar-out", ws.s("back.jsonl")]);
    assert_eq!(read(&ws.p("back.conll")), read(&ws.p("corpus.conll")));
    assert_eq!(read(&ws.p("back.jsonl")), read(&ws.p("types.jsonl")));

    ok(&["mark", ws.s("corpus.conll"), "-o", ws.s("requests.jsonl")]);
    let requests = fs::read_to_string(ws.p("requests.jsonl")).unwrap();
    let r: Value = serde_json::from_str(requests.lines().next().unwrap()).unwrap();
    let tokens: Vec<&str> = r["tokens"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert!(tokens.contains(&"<ENT_START>") && tokens.contains(&"<ENT_END>"));
    assert_eq!(requests.lines().count(), fs::read_to_string(ws.p("types.jsonl")).unwrap().lines().count());
}

#[test]
fn invalid_inputs_fail_with_structured_errors() {
    let ws = Workspace::new(3);
    let corpus = ws.s("corpus.conll");

    let e = failure(&["score", "--key", ws.s("missing.conll"), "--response", corpus]);
    assert_eq!(e["error"]["kind"], "io");

    let e = failure(&["convert", corpus, "--scheme", "nope", "-o", ws.s("x.conll")]);
    assert_eq!(e["error"]["kind"], "scheme");
    assert!(!ws.p("x.conll").exists());

    fs::write(ws.p("bad.conll"), "#begin document d\nd\t0\t0\tA\t-\t-\t-\t-\t-\t-\t*\t(3\n\n#end document\n").unwrap();
    let e = failure(&["score", "--key", corpus, "--response", ws.s("bad.conll")]);
    assert_eq!(e["error"]["kind"], "parse");

    ok(&["synth-corpus", "--documents", "2", "--seed", "1", "-o", ws.s("other.conll"), "--types-out", ws.s("other.jsonl")]);
    let e = failure(&["score", "--key", corpus, "--response", ws.s("other.conll")]);
    assert_eq!(e["error"]["kind"], "unknown_document");

    fs::write(ws.p("bad.cte1"), b"CTE0").unwrap();
    let e = failure(&["resolve", "--checkpoint", ws.s("none.ckpt"), corpus, "--store", ws.s("bad.cte1"), "-o", ws.s("r.conll")]);
    assert_eq!(e["error"]["kind"], "io");
    ws.train("baseline", "m.ckpt");
    let e = failure(&["resolve", "--checkpoint", ws.s("m.ckpt"), corpus, "--store", ws.s("bad.cte1"), "-o", ws.s("r.conll")]);
    assert_eq!(e["error"]["kind"], "store_format");
    assert!(!ws.p("r.conll").exists());

    // typed variants need types
    let e = failure(&["train", "--train", corpus, "--variant", "et_self", "--synth-dim", "8", "--checkpoint", ws.s("t.ckpt")]);
    assert_eq!(e["error"]["kind"], "invalid_input");
    assert!(!ws.p("t.ckpt").exists() && !ws.p("t.ckpt.manifest.json").exists());

    let e = failure(&["train", "--train", corpus, "--variant", "baseline", "--checkpoint", ws.s("t.ckpt")]);
    assert!(e["error"]["message"].as_str().unwrap().contains("--synth-dim"));

    fs::write(ws.p("g.toml"), "variants = [\"baseline\"]\nfolds = 2\ntype_source = \"predicted\"\n").unwrap();
    let e = failure(&["grid", ws.s("g.toml"), "--train", corpus, "--synth-dim", "8"]);
    assert!(e["error"]["message"].as_str().unwrap().contains("predicted_sidecar"));

    fs::write(ws.p("bad.toml"), "bilstm_hidden = 0\n").unwrap();
    let e = failure(&["train", "--train", corpus, "--variant", "baseline", "--synth-dim", "8", "--config", ws.s("bad.toml"), "--checkpoint", ws.s("t.ckpt")]);
    assert_eq!(e["error"]["kind"], "invalid_input");

    // usage errors come from the argument parser with its own exit code
    let out = etcoref(&["train", "--variant", "et"]);
    assert_eq!(out.status.code(), Some(2));
}
