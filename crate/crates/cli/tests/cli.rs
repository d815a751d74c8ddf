use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const MINIMAL: &str = r#"{
  "topology": {"kind": "torus", "sides": [1], "kernel": {"kind": "isolated"}},
  "arrivals": {"kind": "bernoulli", "mean": 0.5},
  "time": {"model": "discrete", "slots": 100000},
  "run": {"seed": 1}
}"#;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn latqueue(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_latqueue"));
    c.args(args).env_remove("LATQUEUE_OUT");
    c
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    latqueue(&args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// The single file in `dir` named `stem-<digest>.<ext>`; the extension is
/// csv for tables and jsonl for records.
fn artifact(dir: &Path, stem: &str) -> PathBuf {
    let ext = match stem {
        "run" | "verify" => "jsonl",
        _ => "csv",
    };
    let mut hits: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_str().unwrap();
            name.starts_with(&format!("{stem}-")) && name.ends_with(&format!(".{ext}"))
        })
        .collect();
    assert_eq!(hits.len(), 1, "{stem} in {}: {hits:?}", dir.display());
    hits.pop().unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn minimal_simulation_writes_trace_and_records() {
    let sb = Sandbox::new();
    let cfg = sb.config("min.json", MINIMAL);
    let out = sb.out("o");
    let o = run("simulate", &cfg, &out, &["--trace-stride", "1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));

    let mut rdr = csv::Reader::from_path(artifact(&out, "trace")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["slot", "node", "queue_len"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 100);
    assert_eq!(&rows[1][0], "1000");

    let records = jsonl(&artifact(&out, "run"));
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["record"], "replication");
    assert_eq!(records[1]["record"], "summary");
    let digest = records[0]["digest"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(records.iter().all(|r| r["digest"] == digest && r["master_seed"] == 1));
    let mean = records[1]["statistics"]["mean_queue"]["mean"].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 0.01);
    for f in std::fs::read_dir(&out).unwrap() {
        let name = f.unwrap().file_name().into_string().unwrap();
        assert!(name.contains(&digest[..16]), "{name}");
    }
}

#[test]
fn bernoulli_mean_of_one_is_a_config_error() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.json", &MINIMAL.replace("0.5", "1.0"));
    let o = run("simulate", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("arrivals.mean"), "{}", text(&o));
}

#[test]
fn schema_violations_name_the_field() {
    let sb = Sandbox::new();
    for (from, to, field) in [
        ("\"slots\"", "\"slotz\"", "time"),
        ("\"seed\": 1", "\"seed\": \"one\"", "run.seed"),
        ("\"torus\"", "\"sphere\"", "topology"),
    ] {
        let cfg = sb.config("bad.json", &MINIMAL.replace(from, to));
        let o = run("simulate", &cfg, &sb.out("o"), &[]);
        assert_eq!(o.status.code(), Some(2), "{}", text(&o));
        assert!(text(&o).contains(field), "{field}: {}", text(&o));
    }
    let o = latqueue(&["simulate", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_bit_identical_across_job_counts() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "ring.json",
        r#"{
          "topology": {"kind": "torus", "sides": [6]},
          "arrivals": {"kind": "bernoulli", "mean": 0.25},
          "time": {"model": "discrete", "slots": 20000},
          "run": {"seed": 9, "replications": 3}
        }"#,
    );
    let a = run("simulate", &cfg, &sb.out("a"), &["--jobs", "1"]);
    let b = run("simulate", &cfg, &sb.out("b"), &["--jobs", "3"]);
    assert!(a.status.success() && b.status.success());
    let ra = jsonl(&artifact(&sb.out("a"), "run"));
    let rb = jsonl(&artifact(&sb.out("b"), "run"));
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(serde_json::to_string(&x["statistics"]).unwrap(), serde_json::to_string(&y["statistics"]).unwrap());
    }
    assert_eq!(ra[3]["seeds"], rb[3]["seeds"]);
    let trace_a = std::fs::read(artifact(&sb.out("a"), "trace")).unwrap();
    let trace_b = std::fs::read(artifact(&sb.out("b"), "trace")).unwrap();
    assert_eq!(trace_a, trace_b);

    let c = run("simulate", &cfg, &sb.out("c"), &["--seed", "10"]);
    assert!(c.status.success());
    let rc = jsonl(&artifact(&sb.out("c"), "run"));
    assert_ne!(rc[0]["digest"], ra[0]["digest"]);
    assert_ne!(rc[0]["statistics"], ra[0]["statistics"]);
}

#[test]
fn key_order_does_not_change_the_digest() {
    let sb = Sandbox::new();
    let permuted = r#"{"run":{"seed":1},"time":{"slots":100000,"model":"discrete"},
        "arrivals":{"mean":0.5,"kind":"bernoulli"},
        "topology":{"kernel":{"kind":"isolated"},"sides":[1],"kind":"torus"}}"#;
    let a = run("simulate", &sb.config("a.json", MINIMAL), &sb.out("a"), &[]);
    let b = run("simulate", &sb.config("b.json", permuted), &sb.out("b"), &[]);
    assert!(a.status.success() && b.status.success());
    let ra = jsonl(&artifact(&sb.out("a"), "run"));
    let rb = jsonl(&artifact(&sb.out("b"), "run"));
    assert_eq!(ra[0]["digest"], rb[0]["digest"]);
}

#[test]
fn output_directory_from_environment() {
    let sb = Sandbox::new();
    let cfg = sb.config("min.json", MINIMAL);
    let out = sb.out("env");
    let o = latqueue(&["simulate", "--config", cfg.to_str().unwrap()])
        .env("LATQUEUE_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    artifact(&out, "run");
}

fn bounds_table(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["name", "theoretical", "empirical", "ci", "verdict", "note"]
    );
    rdr.records().map(Result::unwrap).collect()
}

#[test]
fn continuous_multihop_bound_is_six() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "mh.json",
        r#"{
          "topology": {"kind": "torus", "sides": [16]},
          "arrivals": {"kind": "poisson", "rate": 0.125},
          "routing": {"kind": "multi_hop", "exit_probability": 0.5},
          "time": {"model": "continuous", "horizon": 20000.0},
          "run": {"seed": 4, "bounds": {"theorems": ["thm55", "thm41"]}}
        }"#,
    );
    let o = run("bounds", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rows = bounds_table(&artifact(&sb.out("o"), "bounds"));
    assert_eq!(&rows[0][0], "thm55");
    assert!((rows[0][1].parse::<f64>().unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(&rows[0][4], "holds");
    assert_eq!(&rows[1][0], "thm41");
    assert_eq!(&rows[1][4], "inapplicable");
}

#[test]
fn second_moment_bound_without_arrivals_is_tight() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "zero.json",
        r#"{
          "topology": {"kind": "torus", "sides": [4]},
          "arrivals": {"kind": "bernoulli", "mean": 0.0},
          "time": {"model": "discrete", "slots": 2000},
          "run": {"bounds": {"theorems": ["thm23"]}}
        }"#,
    );
    let o = run("bounds", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rows = bounds_table(&artifact(&sb.out("o"), "bounds"));
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(&rows[0][4], "holds");
}

#[test]
fn weighted_moment_bound_on_exact_solve() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "exact.json",
        r#"{
          "topology": {"kind": "graph", "nodes": 2, "edges": [[0, 1, 2.0]]},
          "arrivals": {"kind": "bernoulli", "mean": 0.2},
          "time": {"model": "discrete", "slots": 1},
          "run": {"exact": {"cap": 30}, "bounds": {"theorems": ["thm22"], "estimator": "exact"}}
        }"#,
    );
    let o = run("bounds", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rows = bounds_table(&artifact(&sb.out("o"), "bounds"));
    assert_eq!(&rows[0][4], "holds");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.0);

    let o = run("exact", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let mut rdr = csv::Reader::from_path(artifact(&sb.out("o"), "marginals")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["node", "queue_len", "probability"]);
    let total: f64 = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[0] == "0")
        .map(|r| r[2].parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn exact_refuses_multihop() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "mh.json",
        r#"{
          "topology": {"kind": "torus", "sides": [4]},
          "arrivals": {"kind": "bernoulli", "mean": 0.05},
          "routing": {"kind": "multi_hop", "exit_probability": 0.5},
          "time": {"model": "discrete", "slots": 1}
        }"#,
    );
    let o = run("exact", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn verify_suites_pass_and_print_witness() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "v.json",
        r#"{
          "topology": {"kind": "torus", "sides": [8]},
          "arrivals": {"kind": "bernoulli", "mean": 0.25},
          "time": {"model": "discrete", "slots": 1},
          "run": {"seed": 5, "verify": [
            {"suite": "fairness", "states": 20, "trials": 200},
            {"suite": "coupling", "pairs": 100, "slots": 200},
            {"suite": "feasibility", "lambda": [0.9, 0.01], "cell": [2]}
          ]}
        }"#,
    );
    let o = run("verify", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = text(&o);
    assert!(t.contains("feasible, ρ = 0.938761, witness p = ["), "{t}");
    let records = jsonl(&artifact(&sb.out("o"), "verify"));
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r["passed"] == true));
}

#[test]
fn failed_suite_exits_one() {
    let sb = Sandbox::new();
    // X0 = 5 lies outside a box of side 3
    let cfg = sb.config(
        "d.json",
        r#"{
          "topology": {"kind": "torus", "sides": [3]},
          "arrivals": {"kind": "bernoulli", "mean": 0.25},
          "time": {"model": "discrete", "slots": 1},
          "run": {"verify": [{"suite": "drift", "max_coordinate": 3,
            "lyapunov": {"nu": 0.3333333333333333, "epsilon": 0.08333333333333333}}]}
        }"#,
    );
    let o = run("verify", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let fixed = std::fs::read_to_string(&cfg).unwrap().replace("\"max_coordinate\": 3", "\"max_coordinate\": 20");
    let o = run("verify", &sb.config("d2.json", &fixed), &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}

#[test]
fn sweep_writes_one_row_per_replication() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "s.json",
        r#"{
          "topology": {"kind": "torus", "sides": [8]},
          "arrivals": {"kind": "bernoulli", "mean": 0.1},
          "time": {"model": "discrete", "slots": 40000},
          "run": {"seed": 2, "replications": 2, "sweep": {"lambdas": [0.1, 0.6]}}
        }"#,
    );
    let o = run("sweep", &cfg, &sb.out("o"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let mut rdr = csv::Reader::from_path(artifact(&sb.out("o"), "sweep")).unwrap();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][4], "stabilizing");
    assert_eq!(&rows[3][4], "growing");
}
