use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hnn_core::builtins::{builtin, ExplicitFamily};
use hnn_core::group::FiniteGroup;
use serde_json::Value;
use tempfile::TempDir;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hnn-forge"))
        .args(args)
        .env_remove("HNN_FORGE_DIM_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn without_timing(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn list_prints_every_builtin_with_dimensions() {
    let o = forge(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (name, dims) in [("z2-free", ["2", "1", "10"]), ("z4-sigma2", ["4", "2", "20"]), ("s3-quotient", ["6", "2", "42"])] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(&cols[1..4], &dims, "{line}");
    }
}

#[test]
fn passing_run_exits_zero_and_writes_json() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.json");
    let o = forge(&["run", "--builtin", "z2-free", "--suite", "wordalg", "--suite", "oracle", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = without_timing(&out);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["config"]["L"], 2);
    let suites: Vec<&str> = v["suites"].as_array().unwrap().iter().map(|s| s["suite"].as_str().unwrap()).collect();
    assert_eq!(suites, ["wordalg", "oracle"]);
}

#[test]
fn identical_seeds_give_identical_reports() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = forge(&["run", "--builtin", "z4-sigma2", "--seed", "99", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(
        serde_json::to_string(&without_timing(&a)).unwrap(),
        serde_json::to_string(&without_timing(&b)).unwrap()
    );
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(forge(&["run", "--builtin", "no-such"]).status.code(), Some(2));
    assert_eq!(forge(&["run", "--builtin", "z2-free", "--L", "0"]).status.code(), Some(2));
    assert_eq!(forge(&["run", "--builtin", "z2-free", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(forge(&["run", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.toml", "family = \"group_algebra_subgroup\"\ngroup = \"missing.json\"\nsubgroup = \"s.json\"\n");
    let o = forge(&["run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    let typo = write(dir.path(), "typo.toml", "family = \"builtin\"\nbuiltin = \"z2-free\"\nseeed = 3\n");
    assert_eq!(forge(&["run", "--config", &typo]).status.code(), Some(2));
}

#[test]
fn check_failures_exit_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_hnn-forge"))
        .args(["run", "--builtin", "z4-sigma2", "--suite", "fock"])
        .env("HNN_FORGE_DIM_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("exceeds the cap 10"));
}

#[test]
fn group_algebra_config_runs_with_the_oracle() {
    let dir = TempDir::new().unwrap();
    let h = FiniteGroup::cyclic(6);
    write(dir.path(), "c6.json", &serde_json::to_string(&h.to_file()).unwrap());
    write(dir.path(), "sigma.json", r#"{"subgroup": ["e", "g2", "g4"], "theta": {"e": "e", "g2": "g4", "g4": "g2"}}"#);
    let cfg = write(
        dir.path(),
        "c6.toml",
        "family = \"group_algebra_subgroup\"\ngroup = \"c6.json\"\nsubgroup = \"sigma.json\"\nL = 1\nseed = 5\nsuites = [\"construction\", \"oracle\", \"fock\", \"jv\"]\n[tolerances]\nalg = 1e-9\n",
    );
    let out = dir.path().join("r.json");
    let o = forge(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = without_timing(&out);
    assert_eq!(v["config"]["family"], "group_algebra_subgroup");
    let oracle = v["suites"].as_array().unwrap().iter().find(|s| s["suite"] == "oracle").unwrap();
    assert!(!oracle["checks"].as_array().unwrap().is_empty());
}

#[test]
fn function_algebra_config_matches_the_builtin() {
    let dir = TempDir::new().unwrap();
    let g = FiniteGroup::symmetric3();
    write(dir.path(), "s3.json", &serde_json::to_string(&g.to_file()).unwrap());
    let cfg = write(
        dir.path(),
        "s3.toml",
        "family = \"function_algebra_quotient\"\ngroup = \"s3.json\"\nnormal = [\"012\", \"120\", \"201\"]\nsuites = [\"construction\", \"wordalg\", \"fock\"]\n",
    );
    let o = forge(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let not_normal = write(
        dir.path(),
        "bad.toml",
        "family = \"function_algebra_quotient\"\ngroup = \"s3.json\"\nnormal = [\"012\", \"021\"]\n",
    );
    assert_eq!(forge(&["run", "--config", &not_normal]).status.code(), Some(2));
}

#[test]
fn explicit_config_round_trips_a_builtin() {
    let dir = TempDir::new().unwrap();
    let fam = ExplicitFamily::from_input(&builtin("z4-sigma2").unwrap()).unwrap();
    write(dir.path(), "z4.json", &serde_json::to_string(&fam).unwrap());
    let cfg = write(dir.path(), "z4.toml", "family = \"explicit\"\nexplicit = \"z4.json\"\nL = 2\nsuites = [\"haar\", \"jv\", \"homotopy\"]\n");
    let o = forge(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("overall: PASS"));
}
