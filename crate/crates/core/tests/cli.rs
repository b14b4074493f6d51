use std::path::PathBuf;
use std::process::{Command, Output};

fn mvivm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvivm")).args(args).output().expect("binary runs")
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mvivm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const TRIANGLE_STREAM: &str = r#"{"op":"+","rel":"R","tuple":["a1","b1"]}
{"op":"+","rel":"S","tuple":["b1","c1"]}
{"op":"+","rel":"T","tuple":["a1","c1"]}
{"op":"+","rel":"S","tuple":["b2","c1"]}
{"op":"-","rel":"S","tuple":["b1","c1"]}
{"op":"-","rel":"S","tuple":["b2","c1"]}
{"op":"-","rel":"T","tuple":["a1","c1"]}
{"op":"-","rel":"R","tuple":["a1","b1"]}
"#;

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn lines(o: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&o.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn analyze_reports_widths() {
    let o = mvivm(&["analyze", "triangle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["fhtw"], "3/2");
    assert_eq!(v["w_hat"], "3/2");
    assert_eq!(v["hierarchical"], false);
    assert_eq!(v["components"].as_array().unwrap().len(), 6);

    let q = scratch("q.txt", "Q(A,B,C) :- R(A,B), S(A,C).");
    let v: serde_json::Value = serde_json::from_slice(&mvivm(&["analyze", q.to_str().unwrap()]).stdout).unwrap();
    assert_eq!(v["hierarchical"], true);
    assert_eq!(v["w_hat"], "1");
}

#[test]
fn run_prints_results_and_deltas() {
    let s = scratch("tri.jsonl", TRIANGLE_STREAM);
    let s = s.to_str().unwrap();
    let o = mvivm(&["run", "triangle", s, "--enumerate-every", "1"]);
    assert_eq!(code(&o), 0);
    let sizes: Vec<usize> = lines(&o).iter().map(|l| l["full"].as_array().unwrap().len()).collect();
    assert_eq!(sizes, vec![0, 0, 1, 1, 0, 0, 0, 0]);

    let o = mvivm(&["run", "triangle", s, "--mode", "delta", "--enumerate-every", "1"]);
    assert_eq!(code(&o), 0);
    let out = lines(&o);
    assert_eq!(out.len(), 9, "eight deltas then the final result");
    assert_eq!(out[2]["delta"], serde_json::json!([["+", ["a1", "b1", "c1"]]]));
    assert_eq!(out[4]["delta"], serde_json::json!([["-", ["a1", "b1", "c1"]]]));
    assert_eq!(out[8]["full"], serde_json::json!([]));

    for engine in ["naive", "delta-base"] {
        let o = mvivm(&["run", "triangle", s, "--engine", engine]);
        assert_eq!(code(&o), 0, "{engine}");
    }
}

#[test]
fn verify_agrees_on_the_trace() {
    let s = scratch("tri-verify.jsonl", TRIANGLE_STREAM);
    let o = mvivm(&["verify", "triangle", s.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["updates"], 8);
    assert!(v["divergences"].as_array().unwrap().is_empty());
}

#[test]
fn input_errors_exit_two() {
    let bad_rel = scratch("bad-rel.jsonl", "{\"op\":\"+\",\"rel\":\"X\",\"tuple\":[\"a\",\"b\"]}\n");
    let bad_arity = scratch("bad-arity.jsonl", "{\"op\":\"+\",\"rel\":\"R\",\"tuple\":[\"a\"]}\n");
    let absent = scratch("absent.jsonl", "{\"op\":\"-\",\"rel\":\"R\",\"tuple\":[\"a\",\"b\"]}\n");
    let bad_query = scratch("bad-query.txt", "Q(A :- R(A");
    for p in [&bad_rel, &bad_arity, &absent] {
        let o = mvivm(&["run", "triangle", p.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{}", p.display());
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(code(&mvivm(&["analyze", bad_query.to_str().unwrap()])), 2);
    assert_eq!(code(&mvivm(&["analyze", "/nonexistent/query"])), 2);
    assert_eq!(code(&mvivm(&["bench", "triangle", "--gen", "nonsense"])), 2);
    assert_eq!(code(&mvivm(&["bench", "triangle", "--gen", "fifo", "--sizes", "100"])), 2);
    assert_eq!(code(&mvivm(&["frobnicate"])), 2);

    let tri = scratch("tri-io.jsonl", TRIANGLE_STREAM);
    let o = mvivm(&["run", "triangle", tri.to_str().unwrap(), "--engine", "insert-only"]);
    assert_eq!(code(&o), 2);
    let o = mvivm(&["run", "triangle", absent.to_str().unwrap(), "--lenient"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
}

#[test]
fn bench_writes_csv() {
    let csv = scratch("bench.csv", "");
    let o = mvivm(&[
        "bench", "3path", "--gen", "insert_only_random", "--sizes", "200,400", "--engine", "insert-only", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut it = text.lines();
    assert_eq!(it.next(), Some("query,engine,kind,N,seed,total_ms,slope,r2"));
    let rows: Vec<Vec<&str>> = it.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "insert-only");
    assert_eq!(rows[0][3], "200");
    assert_eq!(rows[1][3], "400");

    let dump = scratch("dump.jsonl", "");
    let o = mvivm(&["bench", "triangle", "--gen", "fifo", "--sizes", "50,60", "--dump", dump.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = mvivm(&["verify", "triangle", dump.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
