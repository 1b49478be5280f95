use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mathesis::expr_io::parse_trace;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn mathesis(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mathesis"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MATHESIS_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_exit_codes_follow_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let ok = mathesis(&["verify", path(&fixture("congruent.mth"))], dir.path());
    assert_eq!(code(&ok), 0);
    let report: Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert!(report["total"].as_f64().unwrap() < 1e-8);

    let bad = mathesis(&["verify", path(&fixture("congruence_violated.mth"))], dir.path());
    assert_eq!(code(&bad), 1);
    let report: Value = serde_json::from_str(&stdout(&bad)).unwrap();
    let edges = report["per_edge"].as_array().unwrap();
    let violated: Vec<&Value> = edges.iter().filter(|e| e["violated"] == true).collect();
    assert_eq!(violated.len(), 1);
    assert!((violated[0]["value"].as_f64().unwrap() - 9.0).abs() < 1e-12);
    assert!(violated[0]["fact"].as_str().unwrap().starts_with("(Congruent"));

    let malformed = mathesis(&["verify", path(&fixture("malformed.mth"))], dir.path());
    assert_eq!(code(&malformed), 2);
    assert!(!malformed.stderr.is_empty());
}

#[test]
fn chain_is_proved_in_two_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = mathesis(&["prove", path(&fixture("chain_two.mth")), "--method", "mcts"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let trace = parse_trace(&fs::read_to_string(dir.path().join("trace.jsonl")).unwrap()).unwrap();
    assert_eq!(trace.steps.len(), 2);
    assert!(trace.end.success);
    assert_eq!(trace.header.method, "mcts");
    assert_eq!(trace.header.version, env!("CARGO_PKG_VERSION"));
    assert!(trace.header.e0 > 0.01);
}

#[test]
fn zero_budget_is_an_honest_failure() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["mcts", "eps", "greedy"] {
        let o = mathesis(
            &["prove", path(&fixture("chain_two.mth")), "--method", method, "--set", "prove.budget=0"],
            dir.path(),
        );
        assert_eq!(code(&o), 1, "{method}");
        assert!(dir.path().join("trace.jsonl").exists());
    }
}

#[test]
fn greedy_rejects_unliftable_problems() {
    let dir = tempfile::tempdir().unwrap();
    let o = mathesis(&["prove", path(&fixture("symmetric.mth")), "--method", "greedy"], dir.path());
    assert_eq!(code(&o), 2);
    let o = mathesis(&["prove", path(&fixture("chain_two.mth")), "--method", "bogus"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn same_seed_gives_identical_traces() {
    let problem = fixture("chain_two.mth");
    for method in ["mcts", "eps", "greedy"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let args = ["prove", path(&problem), "--method", method, "--seed", "11"];
        assert_eq!(code(&mathesis(&args, a.path())), code(&mathesis(&args, b.path())));
        let ta = fs::read(a.path().join("trace.jsonl")).unwrap();
        assert_eq!(ta, fs::read(b.path().join("trace.jsonl")).unwrap(), "{method}");
        assert!(String::from_utf8(ta).unwrap().contains("\"seed\":11"));
    }
}

#[test]
fn training_logs_every_window_with_run_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = mathesis(&["train", "--episodes", "200", "--seed", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    let records: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 25);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["episode"], 8 * (i as u64 + 1));
        assert!((0.0..=1.0).contains(&r["success_rate"].as_f64().unwrap()));
        assert!(r["mean_return"].is_number());
        assert_eq!(r["seed"], 2);
        assert!(r["config_hash"].as_str().is_some_and(|h| h.len() == 16));
        assert!(r["version"].is_string());
    }
}

#[test]
fn resumed_training_matches_one_uninterrupted_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&mathesis(&["train", "--episodes", "24", "--seed", "4"], a.path())), 0);
    assert_eq!(code(&mathesis(&["train", "--episodes", "16", "--seed", "4"], b.path())), 0);
    assert_eq!(code(&mathesis(&["train", "--episodes", "8", "--seed", "4", "--resume"], b.path())), 0);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "checkpoint.bin"), read(b.path(), "checkpoint.bin"));
    assert_eq!(read(a.path(), "metrics.jsonl"), read(b.path(), "metrics.jsonl"));
}

#[test]
fn corrupt_checkpoint_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("checkpoint.bin"), b"MTHSTRN1\x09\x00\x00\x00").unwrap();
    let o = mathesis(&["train", "--episodes", "8", "--resume"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn behavior_cloning_reports_final_cross_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let o = mathesis(&["bc", "--seed", "3"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("final cross-entropy"));
    let log: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bc.json")).unwrap()).unwrap();
    assert_eq!(log["traces"], 10);
    assert!(log["final_cross_entropy"].as_f64().unwrap() < 0.1);
    assert!(dir.path().join("checkpoint.bin").exists());
}

#[test]
fn proof_traces_feed_behavior_cloning_and_checkpoints_guide_search() {
    let dir = tempfile::tempdir().unwrap();
    let problem = fixture("chain_two.mth");
    assert_eq!(code(&mathesis(&["prove", path(&problem)], dir.path())), 0);
    let trace = dir.path().join("trace.jsonl");
    let bc_dir = dir.path().join("bc");
    let o = mathesis(&["bc", path(&trace)], &bc_dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("cloned 1 traces"));
    let ckpt = format!("prove.checkpoint={}", bc_dir.join("checkpoint.bin").display());
    let o = mathesis(&["prove", path(&problem), "--method", "greedy", "--set", &ckpt], &dir.path().join("g"));
    assert_eq!(code(&o), 0);
}

#[test]
fn flags_override_config_files_and_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "seed = 5\nprove.budget = 500\n").unwrap();
    let problem = fixture("chain_two.mth");
    let seed_of = |d: &Path| parse_trace(&fs::read_to_string(d.join("trace.jsonl")).unwrap()).unwrap().header.seed;

    let o = mathesis(&["prove", path(&problem), "--config", path(&cfg)], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(seed_of(dir.path()), 5);

    let o = mathesis(&["prove", path(&problem), "--config", path(&cfg), "--set", "seed=6"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(seed_of(dir.path()), 6);

    let o = mathesis(&["prove", path(&problem), "--config", path(&cfg), "--set", "seed=6", "--seed", "7"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(seed_of(dir.path()), 7);

    let o = Command::new(env!("CARGO_BIN_EXE_mathesis"))
        .args(["prove", path(&problem), "--out", path(dir.path())])
        .env("MATHESIS_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(seed_of(dir.path()), 5);

    fs::write(&cfg, "this line has no equals sign\n").unwrap();
    assert_eq!(code(&mathesis(&["verify", path(&problem), "--config", path(&cfg)], dir.path())), 2);
}

#[test]
fn selftest_prints_a_passing_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = mathesis(&["selftest", "--set", "selftest.fd_seeds=5", "--set", "selftest.cases=10"], dir.path());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("faithfulness") && out.contains("smoothness") && out.contains("pass"));
}

#[test]
fn zero_workers_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mathesis(&["selftest", "--workers", "0"], dir.path())), 2);
}
