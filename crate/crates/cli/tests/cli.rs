use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use splitgnn_core::dataset::read_labels;

fn splitgnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitgnn")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = splitgnn(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_set(dir: &Path, name: &str, count: &str, seed: &str) {
    ok(dir, &["generate", "--family", "uf", "-k", "3", "-n", "10", "-m", "40", "--weighted", "--count", count, "--label", "--seed", seed, "--out", name]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&splitgnn(d, &["solve", "--bogus"])), 1);
    assert_eq!(code(&splitgnn(d, &["generate", "--family", "uf", "-n", "5"])), 1);
    assert_eq!(code(&splitgnn(d, &["solve", "missing.wcnf"])), 2);
    assert_eq!(code(&splitgnn(d, &["solve", "x.wcnf", "--time-limit", "0"])), 1);
    assert_eq!(code(&splitgnn(d, &["--help"])), 0);

    fs::write(d.join("contradiction.wcnf"), "p wcnf 2 3 10\n10 1 0\n10 -1 0\n1 2 0\n").unwrap();
    let out = splitgnn(d, &["solve", "contradiction.wcnf", "--max-steps", "200", "--no-timing"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(record["delta_obj"].is_null());
}

#[test]
fn pigeonhole_is_solved() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (dir, hard) in [("soft", false), ("hard", true)] {
        let mut args = vec!["generate", "--family", "php", "-p", "4", "--holes", "3", "--label", "--out", dir];
        if hard {
            args.push("--hard");
        }
        ok(d, &args);
        let labels = read_labels(&d.join(dir)).unwrap().unwrap();
        assert_eq!(labels.len(), 1);
        assert!(labels[0].proven && labels[0].optimal_cost >= 1);
        let out = ok(d, &["solve", dir, "--max-steps", "5000", "--no-timing"]);
        let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(record["delta_obj"].as_u64(), Some(labels[0].optimal_cost));
    }
}

#[test]
fn generate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_set(d, "a", "3", "5");
    small_set(d, "b", "3", "5");
    small_set(d, "c", "3", "6");
    for f in ["inst_0000.wcnf", "inst_0002.wcnf", "labels.jsonl", "generate.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(d.join("a/inst_0000.wcnf")).unwrap(), fs::read(d.join("c/inst_0000.wcnf")).unwrap());
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("gen.conf"), "# dataset\nfamily = uf\nclause_len = 3\nvars = 8\nclauses = 30\ncount = 2\nweighted = true\nseed = 4\n").unwrap();
    ok(d, &["generate", "--config", "gen.conf", "--out", "from_conf"]);
    ok(d, &["generate", "--family", "uf", "-k", "3", "-n", "8", "-m", "30", "--count", "2", "--weighted", "--seed", "4", "--out", "from_flags"]);
    assert_eq!(fs::read(d.join("from_conf/inst_0001.wcnf")).unwrap(), fs::read(d.join("from_flags/inst_0001.wcnf")).unwrap());

    // command-line flags win over the file
    ok(d, &["generate", "--config", "gen.conf", "-n", "9", "--out", "override"]);
    let text = fs::read_to_string(d.join("override/inst_0000.wcnf")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("p wcnf 9 ")), "{text}");

    fs::write(d.join("bad.conf"), "no_such_flag = 1\n").unwrap();
    assert_eq!(code(&splitgnn(d, &["generate", "--config", "bad.conf", "--family", "uf"])), 1);
}

#[test]
fn model_modes_need_a_checkpoint_and_training_needs_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--family", "uf", "-k", "3", "-n", "8", "-m", "30", "--count", "2", "--out", "plain"]);
    assert_eq!(code(&splitgnn(d, &["solve", "plain", "--mode", "mp"])), 1);
    assert_eq!(code(&splitgnn(d, &["solve", "plain", "--mode", "mp+usb"])), 1);
    let out = splitgnn(d, &["train", "plain", "--epochs", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--label"));
}

#[test]
fn solve_writes_solutions_and_verified_records() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_set(d, "set", "4", "1");
    ok(d, &["solve", "set", "--max-steps", "3000", "--no-timing", "--out", "runs"]);
    let records = fs::read_to_string(d.join("runs/records.jsonl")).unwrap();
    let labels = read_labels(&d.join("set")).unwrap().unwrap();
    for (line, label) in records.lines().zip(&labels) {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["instance"], label.id.as_str());
        assert!(r["wall_time_ms"].is_null());
        assert!(r["delta_obj"].as_u64().unwrap() >= label.optimal_cost);
        let sol = fs::read_to_string(d.join(format!("runs/{}.sol", label.id))).unwrap();
        let signs: Vec<i64> = sol.split_whitespace().map(|s| s.parse().unwrap()).collect();
        let stored: Vec<i64> = r["assignment"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
        assert_eq!(signs, stored);
    }
}

#[test]
fn eval_matches_external_results() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_set(d, "set", "5", "2");
    ok(d, &["solve", "set", "--max-steps", "3000", "--no-timing", "--out", "runs"]);
    let mut ext = String::from("# instance cost\n");
    for line in fs::read_to_string(d.join("runs/records.jsonl")).unwrap().lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        ext.push_str(&format!("{},{}\n", r["instance"].as_str().unwrap(), r["delta_obj"]));
    }
    fs::write(d.join("mirror.txt"), ext).unwrap();
    ok(d, &["eval", "runs/records.jsonl", "--dataset", "set", "--external", "mirror.txt", "--json", "ev.json"]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("ev.json")).unwrap()).unwrap();
    let solvers = report["solvers"].as_array().unwrap();
    assert_eq!(solvers.len(), 2);
    assert_eq!(solvers[0]["mean_delta_obj"], solvers[1]["mean_delta_obj"]);
    for s in solvers {
        assert_eq!(s["max_regret"], 0);
    }

    // a tampered record no longer matches its assignment
    let records = fs::read_to_string(d.join("runs/records.jsonl")).unwrap();
    let mut r: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    r["delta_obj"] = serde_json::json!(r["delta_obj"].as_u64().unwrap() + 1);
    fs::write(d.join("tampered.jsonl"), r.to_string() + "\n").unwrap();
    assert_ne!(code(&splitgnn(d, &["eval", "tampered.jsonl", "--dataset", "set"])), 0);
    assert_eq!(code(&splitgnn(d, &["eval", "runs/records.jsonl"])), 1);
}

#[test]
fn oracle_writes_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_set(d, "set", "3", "3");
    let reference = fs::read(d.join("set/labels.jsonl")).unwrap();
    fs::remove_file(d.join("set/labels.jsonl")).unwrap();
    let out = ok(d, &["oracle", "set", "--write-labels"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    assert_eq!(fs::read(d.join("set/labels.jsonl")).unwrap(), reference);
}

#[test]
fn training_resumes_where_it_stopped() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_set(d, "set", "3", "4");
    let common = ["--dim", "6", "--rounds", "2", "--batch-size", "3", "--seed", "9"];
    let run = |extra: &[&str]| {
        let mut args = vec!["train", "set"];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        ok(d, &args);
    };
    run(&["--epochs", "6", "--out", "full.json"]);
    run(&["--epochs", "3", "--out", "half.json"]);
    run(&["--epochs", "3", "--resume", "half.json", "--out", "half.json"]);
    assert_eq!(fs::read(d.join("full.json")).unwrap(), fs::read(d.join("half.json")).unwrap());
    assert_eq!(fs::read(d.join("full.csv")).unwrap(), fs::read(d.join("half.csv")).unwrap());
    let curve = fs::read_to_string(d.join("half.csv")).unwrap();
    assert_eq!(curve.lines().count(), 7);

    assert_eq!(code(&splitgnn(d, &["train", "set", "--epochs", "1", "--dim", "7", "--resume", "half.json"])), 2);
    ok(d, &["solve", "set", "--mode", "mp", "--checkpoint", "full.json", "--no-timing"]);
}
