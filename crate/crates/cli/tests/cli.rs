use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagfsa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

struct Ws {
    dir: TempDir,
}

impl Ws {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for f in ["tiny4.json", "tiny4.tokens"] {
            fs::copy(fixtures().join(f), dir.path().join(f)).unwrap();
        }
        Ws { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.dir.path().join(name), text).unwrap();
        self.path(name)
    }
}

fn decode(ws: &Ws, mode: &str, extra: &[&str]) -> Output {
    let dag = ws.path("tiny4.json");
    let tokens = ws.path("tiny4.tokens");
    let mut args = vec!["decode", "--dag", &dag, "--tokens", &tokens, "--mode", mode, "--no-timing"];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn greedy_decode_prints_one_line() {
    let ws = Ws::new();
    let o = decode(&ws, "greedy", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["text"], "the cat sat");
    assert_eq!(v["status"], "ok");
    assert_eq!(v["mode"], "greedy");
    assert!(v.get("wall_time_ms").is_none());
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn output_is_reproducible_without_timing() {
    let ws = Ws::new();
    let a = decode(&ws, "wfsa-shortest", &[]);
    let b = decode(&ws, "wfsa-shortest", &[]);
    assert_eq!(a.stdout, b.stdout);
    let timed = run(&["decode", "--dag", &ws.path("tiny4.json"), "--tokens", &ws.path("tiny4.tokens"), "--mode", "greedy"]);
    assert!(json(&timed)["wall_time_ms"].is_number());
}

#[test]
fn unsatisfiable_phrase_exits_with_three() {
    let ws = Ws::new();
    let c = ws.write("c.jsonl", "{\"phrases\": [\"a sit\", \"cat\"]}\n");
    let o = decode(&ws, "hlc", &["--constraints", &c]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["status"], "empty_intersection");
    let ok = ws.write("ok.jsonl", "{\"phrases\": [\"cap\"]}\n");
    let o = decode(&ws, "hlc", &["--constraints", &ok]);
    assert!(o.status.success());
    assert!(json(&o)["text"].as_str().unwrap().contains("cap"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let ws = Ws::new();
    let o = decode(&ws, "hlc", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--constraints"));
    assert_eq!(decode(&ws, "lc", &[]).status.code(), Some(1));
    assert_eq!(decode(&ws, "vc", &[]).status.code(), Some(1));
    assert_eq!(decode(&ws, "nonsense", &[]).status.code(), Some(2));
    let bad = ws.write("bad.json", "{\"num_vertices\": 2}");
    let o = run(&["decode", "--dag", &bad, "--tokens", &ws.path("tiny4.tokens"), "--mode", "greedy"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn length_target_from_flag_or_predictor() {
    let ws = Ws::new();
    let o = decode(&ws, "lc", &["--target-len", "3"]);
    let v = json(&o);
    assert_eq!(v["length"], 3);
    assert_eq!(v["target_length"], 3);
    let pairs = ws.write("pairs.txt", "1 2\n2 3\n4 5\n");
    let pred = ws.path("pred.txt");
    assert!(run(&["fit-length", "--pairs", &pairs, "--out", &pred]).status.success());
    // y = x + 1
    let o = decode(&ws, "lc", &["--len-predictor", &pred, "--input-len", "1"]);
    assert_eq!(json(&o)["target_length"], 2);
    let o = decode(&ws, "lc", &["--target-len", "1", "--len-upper", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["status"], "infeasible");
}

#[test]
fn lexicon_cache_round_trip() {
    let ws = Ws::new();
    let corpus = ws.write("corpus.txt", "a sit. a sit\ncap, a cap! sit\n");
    let words = ws.path("words.txt");
    let cache = ws.path("lex.cache");
    let o = run(&["build-lexicon", "--corpus", &corpus, "--cutoff", "1.0", "--out", &words, "--cache", &cache, "--tokens", &ws.path("tiny4.tokens")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&words).unwrap(), "a\nsit\ncap\n");
    assert!(fs::read_to_string(&cache).unwrap().starts_with("#hash "));

    let cached = decode(&ws, "vc", &["--lexicon", &words, "--lexicon-cache", &cache]);
    assert!(cached.status.success());
    assert!(cached.stderr.is_empty(), "{}", String::from_utf8_lossy(&cached.stderr));
    let fresh = decode(&ws, "vc", &["--lexicon", &words]);
    assert_eq!(cached.stdout, fresh.stdout);
    assert_eq!(json(&fresh)["text"], "a sit");

    let other = ws.write("other.txt", "the\ncat\n");
    let stale = decode(&ws, "vc", &["--lexicon", &other, "--lexicon-cache", &cache]);
    assert!(stale.status.success());
    assert!(String::from_utf8_lossy(&stale.stderr).contains("rebuilt"));
    assert_eq!(json(&stale)["text"], "the cat");
}

#[test]
fn batch_is_ordered_with_a_summary() {
    let ws = Ws::new();
    let mut manifest = String::new();
    for i in 0..6 {
        let phrase = ["cap", "sit", "cat a"][i % 3];
        manifest.push_str(&format!(
            "{{\"id\": \"j{i}\", \"dag\": \"tiny4.json\", \"phrases\": [\"{phrase}\"], \"references\": [\"the cat sat\"]}}\n"
        ));
    }
    let m = ws.write("jobs.jsonl", &manifest);
    let tokens = ws.path("tiny4.tokens");
    let go = |parallel: &str| {
        run(&["batch", "--manifest", &m, "--tokens", &tokens, "--mode", "hlc", "--no-timing", "--parallel", parallel])
    };
    let one = go("1");
    let three = go("3");
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, three.stdout);
    let lines: Vec<Value> = stdout(&one).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    for (i, l) in lines[..6].iter().enumerate() {
        assert_eq!(l["id"], format!("j{i}"));
    }
    let summary = &lines[6];
    assert_eq!(summary["summary"], true);
    assert_eq!(summary["ok"], 4);
    assert_eq!(summary["empty_intersection"], 2);
    assert_eq!(summary["metrics"]["ser"], 0.0);
}

#[test]
fn evaluate_reports_all_metrics() {
    let ws = Ws::new();
    let records = ws.write(
        "r.jsonl",
        "{\"output\": \"Call 555-1234 now\", \"required_values\": [\"555-1234\"], \"references\": [\"Call 555-1234 now\"]}\n\
         {\"output\": \"Cambrige is nice\", \"required_values\": [\"Cambridge\"], \"references\": [\"Cambridge is nice today\"]}\n",
    );
    let vocab = ws.write("v.txt", "Call now is nice\n");
    let o = run(&["evaluate", "--records", &records, "--vocab", &vocab]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["ser"], 0.5);
    assert_eq!(v["eor"], 0.5);
    assert_eq!(v["neo"], 0.5);
    let bp = (1.0f64 - 7.0 / 6.0).exp();
    assert!((v["bp"].as_f64().unwrap() - bp).abs() < 1e-12);
    let plain = run(&["evaluate", "--records", &records]);
    assert!(json(&plain)["neo"].is_null());
}

#[test]
fn synth_is_deterministic() {
    let a = run(&["synth", "--seed", "9", "--vertices", "12", "--vocab-size", "20"]);
    let b = run(&["synth", "--seed", "9", "--vertices", "12", "--vocab-size", "20"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["num_vertices"], 12);
    let bad = run(&["synth", "--seed", "9", "--vertices", "1", "--vocab-size", "20"]);
    assert_eq!(bad.status.code(), Some(1));
}
