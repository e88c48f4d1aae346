use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn gasrepair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasrepair")).args(args).output().expect("run gasrepair")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn detect_clean_contract_reports_nothing() {
    let o = gasrepair(&["detect", path(&corpus("clean.msol"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no vulnerabilities"));
    let o = gasrepair(&["--json", "detect", path(&corpus("clean.msol"))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["vulnerabilities"].as_array().unwrap().len(), 0);
}

#[test]
fn detect_lists_findings_as_json() {
    let o = gasrepair(&["--json", "detect", path(&corpus("banana.msol"))]);
    assert_eq!(o.status.code(), Some(0));
    let kinds: Vec<String> = json(&o)["vulnerabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["kind"].as_str().unwrap().to_string())
        .collect();
    assert!(kinds.contains(&"ED".to_string()));
    assert!(kinds.contains(&"RE".to_string()));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(gasrepair(&["repair", "missing.msol"]).status.code(), Some(1));
    assert_eq!(gasrepair(&["repair"]).status.code(), Some(1));
    assert_eq!(gasrepair(&["frobnicate"]).status.code(), Some(1));
    let c = corpus("airdrop.msol");
    assert_eq!(gasrepair(&["repair", path(&c), "--mode", "annealing"]).status.code(), Some(1));
    assert_eq!(gasrepair(&["repair", path(&c), "--timeout", "0"]).status.code(), Some(1));
    assert_eq!(gasrepair(&["detect", path(&c), "--kinds", "XX"]).status.code(), Some(1));
    assert_eq!(gasrepair(&["gas-compare", path(&c), path(&c), "--weights", "cubic"]).status.code(), Some(1));
}

#[test]
fn unparsable_contract_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.msol");
    std::fs::write(&bad, "contract Bad { function f( }").unwrap();
    let o = gasrepair(&["detect", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.msol"));
}

#[test]
fn repair_banana_fixes_ed_and_re() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = gasrepair(&[
        "repair",
        path(&corpus("banana.msol")),
        "--tests",
        path(&corpus("banana.tests.jsonl")),
        "--timeout",
        "300",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["outcome"], "plausible_found");
    assert_eq!(r["vulnerabilities_before"]["ED"], 1);
    assert_eq!(r["vulnerabilities_before"]["RE"], 1);
    assert_eq!(r["vulnerabilities_after"]["ED"], 0);
    assert_eq!(r["vulnerabilities_after"]["RE"], 0);
    assert!(!r["plausible"].as_array().unwrap().is_empty());
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gasrepair(&[
            "repair",
            path(&corpus("crowdsale.msol")),
            "--deterministic",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn no_plausible_patch_exits_2() {
    // URS only mutates the original once, so a two-edit fix is out of its reach.
    let o = gasrepair(&[
        "--json",
        "repair",
        path(&corpus("token.msol")),
        "--mode",
        "urs",
        "--deterministic",
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(json(&o)["plausible"].as_array().unwrap().is_empty());
}

#[test]
fn clean_contract_needs_no_repair() {
    let o = gasrepair(&["--json", "repair", path(&corpus("clean.msol"))]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["outcome"], "no_vulnerabilities");
    assert_eq!(r["stats"]["candidates_generated"], 0);
}

#[test]
fn record_testgen_and_run_tests_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("txs.jsonl");
    let tests = dir.path().join("tests.jsonl");
    let c = corpus("wallet.msol");
    let o = gasrepair(&[
        "record",
        path(&c),
        "--scenario",
        path(&corpus("wallet.scenario.json")),
        "--out",
        log.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = gasrepair(&["testgen", path(&c), "--log", log.to_str().unwrap(), "--out", tests.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(&tests).unwrap(),
        std::fs::read_to_string(corpus("wallet.tests.jsonl")).unwrap()
    );
    let o = gasrepair(&["--json", "run-tests", path(&c), "--tests", tests.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["failed"], 0);
}

#[test]
fn failing_tests_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("wallet.msol");
    let src = std::fs::read_to_string(corpus("wallet.msol")).unwrap();
    std::fs::write(&broken, src.replace("bal[msg.sender] + msg.value;", "bal[msg.sender] + msg.value + 1;")).unwrap();
    let o =
        gasrepair(&["--json", "run-tests", broken.to_str().unwrap(), "--tests", path(&corpus("wallet.tests.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(json(&o)["failed"].as_u64().unwrap() > 0);
}

#[test]
fn gas_compare_prefers_the_cheaper_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (old, new) = (dir.path().join("old.msol"), dir.path().join("new.msol"));
    std::fs::write(&old, "contract A { uint x; function f() { x = 1; x = 2; } }").unwrap();
    std::fs::write(&new, "contract A { uint x; function f() { x = 2; } }").unwrap();
    let o = gasrepair(&["--json", "gas-compare", old.to_str().unwrap(), new.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["verdict"], "BDominatesA");
    assert_eq!(v["reduced_verdict"], "BDominatesA");
    let o = gasrepair(&["--json", "gas-compare", new.to_str().unwrap(), new.to_str().unwrap()]);
    assert_eq!(json(&o)["verdict"], "NoDominance");
}
