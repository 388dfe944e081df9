use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sublab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sublab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is json")
}

fn default_profile() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles/default.toml")).unwrap()
}

#[test]
fn default_axioms_pass() {
    let out = sublab(&["verify-axioms", "--samples", "30", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["records"].as_array().unwrap().len(), 3);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn corrupted_class_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"X\":\"4:zz\",\"I\":[1],\"w\":\"1\"}\n").unwrap();
    let out = sublab(&["verify-axioms", "--samples", "2", "--class", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
    assert!(out.stdout.is_empty());
}

#[test]
fn empty_class_file_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "# nothing here\n").unwrap();
    let out = sublab(&["verify-axioms", "--samples", "10", "--class", path.to_str().unwrap()]);
    assert!(out.status.success());
    let r = json(&out);
    let user = r["records"].as_array().unwrap().iter().find(|x| x["name"] == "axioms/user").unwrap();
    assert_eq!(user["passed"], true);
    assert_eq!(user["values"]["items"], 0);
}

#[test]
fn profile_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.toml");
    std::fs::write(&path, default_profile().replace("depth = 4", "depth = 4\ndpeth = 3")).unwrap();
    let out = sublab(&["verify-axioms", "--profile", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn class_path_is_relative_to_profile() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.jsonl"), "{\"X\":\"4:00\",\"I\":[1],\"w\":\"1\"}\n").unwrap();
    let path = dir.path().join("p.toml");
    std::fs::write(&path, default_profile().replace("# class = \"extra.jsonl\"", "class = \"c.jsonl\"")).unwrap();
    let out = sublab(&["verify-axioms", "--samples", "2", "--profile", path.to_str().unwrap()]);
    // 4:00 is too short for depth 4, so the file is refused
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_samples_give_an_empty_passing_report() {
    let out = sublab(&["certificates", "--samples", "0"]);
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert!(r["records"].as_array().unwrap().is_empty());
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = sublab(&["exhaustivity", "--depth", "5", "--samples", "20", "--seed", "11", "--format", "csv", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert_eq!(text.lines().next(), Some("sequence,index,weight_bound,verified"));
    assert!(text.lines().count() > 1);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn json_reports_differ_only_in_timing() {
    let run = |seed: &str| {
        let mut r = json(&sublab(&["certificates", "--samples", "5", "--seed", seed]));
        r.as_object_mut().unwrap().remove("timing_ms");
        r
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn one_set_sequence_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.toml");
    std::fs::write(&path, default_profile().replace("length = 20", "length = 1")).unwrap();
    let out = sublab(&["exhaustivity", "--samples", "3", "--profile", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert!(r["witnesses"].as_array().unwrap().is_empty());
}

#[test]
fn eval_of_one_set() {
    // four of the eight points at depth 2
    let out = sublab(&["eval", "--depth", "2", "--set", "2:55"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let rec = &r["records"][0];
    assert_eq!(rec["passed"], true);
    assert!(rec["values"]["value"].is_string());
    let bad = sublab(&["eval", "--depth", "3", "--set", "2:55"]);
    assert_eq!(bad.status.code(), Some(2));
}
