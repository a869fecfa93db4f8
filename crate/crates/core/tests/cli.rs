use std::path::{Path, PathBuf};

use predrace::cli::run_cli;
use predrace::fixtures::TR_FIG1;
use serde_json::{json, Value};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["predrace"];
    full.extend_from_slice(args);
    let code = run_cli(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn write_trace(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text.replace("; ", "\n")).unwrap();
    path
}

#[test]
fn analyze_lock_elision_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_trace(dir.path(), "fig1.trace", TR_FIG1);
    let p = p.to_str().unwrap();

    let (code, out, _) = run(&["analyze", "--relation", "dc", "--tier", "smarttrack", p]);
    assert_eq!(code, 1);
    assert!(out.contains("read-write race on x"), "{out}");
    assert!(out.contains("1 race(s) under dc/smarttrack"));

    let (code, out, _) = run(&["analyze", "--relation", "hb", "--tier", "fto", p]);
    assert_eq!(code, 0);
    assert!(out.contains("0 race(s)"));
}

#[test]
fn stats_json_golden() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_trace(dir.path(), "fig1.trace", TR_FIG1);
    let (code, out, _) = run(&[
        "analyze",
        "--relation",
        "dc",
        "--tier",
        "fto",
        "--stats",
        "--json",
        p.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let doc: Value = serde_json::from_str(&out).unwrap();
    let want = json!({
        "relation": "dc",
        "tier": "fto",
        "races": [{
            "kind": "read-write",
            "var": "x",
            "prior": {"index": 0, "site": "0", "thread": "T1"},
            "curr": {"index": 7, "site": "7", "thread": "T2"},
        }],
        "stats": {
            "relation": "dc",
            "tier": "fto",
            "cases": {
                "ReadSameEpoch": 0, "ReadSharedSameEpoch": 0, "ReadExclusive": 2, "ReadShare": 0,
                "ReadShared": 0, "ReadOwned": 0, "ReadSharedOwned": 0, "WriteReadRace": 0,
                "WriteSameEpoch": 0, "WriteExclusive": 1, "WriteExclusiveRace": 1, "WriteOwned": 0,
                "WriteShared": 0, "WriteSharedRace": 0,
            },
            "nsea": {"read": 2, "write": 2},
            "locksHeld": {"ge1": 2, "ge2": 0, "ge3": 0},
        },
    });
    assert_eq!(doc, want);
}

#[test]
fn errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_trace(dir.path(), "fig1.trace", TR_FIG1);
    let p = p.to_str().unwrap();
    let (code, _, err) = run(&["analyze", "--relation", "hb", "--tier", "smarttrack", p]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
    assert_eq!(
        run(&["analyze", "--relation", "xx", "--tier", "fto", p]).0,
        2
    );
    let missing = dir.path().join("missing.trace");
    assert_eq!(
        run(&[
            "analyze",
            "--relation",
            "dc",
            "--tier",
            "fto",
            missing.to_str().unwrap()
        ])
        .0,
        2
    );
    let bad = write_trace(dir.path(), "bad.trace", "T1 acq m; T2 acq m");
    assert_eq!(
        run(&[
            "analyze",
            "--relation",
            "dc",
            "--tier",
            "fto",
            bad.to_str().unwrap()
        ])
        .0,
        2
    );
    assert_eq!(run(&["diff", "--seeds", "5..1"]).0, 2);
}

#[test]
fn oracle_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_trace(dir.path(), "fig1.trace", TR_FIG1);
    let p = p.to_str().unwrap();
    let (code, out, _) = run(&["oracle", "--relation", "wcp", "--json", p]);
    assert_eq!(code, 1);
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["races"][0]["prior"]["index"], 0);
    assert_eq!(doc["races"][0]["curr"]["index"], 7);

    let (code, out, _) = run(&["oracle", "--predictable", p]);
    assert_eq!(code, 1);
    assert!(out.contains("predictable race"), "{out}");

    let capo = write_trace(dir.path(), "capo.trace", &predrace::fixtures::tr_capo());
    let (code, out, _) = run(&["oracle", "--predictable", capo.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "no predictable race");
}

#[test]
fn gen_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.trace");
    let path = path.to_str().unwrap();
    let args = [
        "gen",
        "--threads",
        "4",
        "--events",
        "200",
        "--seed",
        "9",
        "--fork-join",
        "-o",
        path,
    ];
    assert_eq!(run(&args).0, 0);
    let first = std::fs::read_to_string(path).unwrap();
    assert_eq!(run(&args).0, 0);
    assert_eq!(std::fs::read_to_string(path).unwrap(), first);
    let code = run(&["analyze", "--relation", "wdc", "--tier", "smarttrack", path]).0;
    assert!(code == 0 || code == 1);
}

#[test]
fn diff_reports_and_writes_repros() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["diff", "--seeds", "0..50", "--oracle"]);
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["tracesRun"], 50);
    assert_eq!(doc["disagreements"].as_array().unwrap().len(), 0);

    // The hidden mutant switch gives the harness something to find.
    let config = dir.path().join("cfg.json");
    let cfg = json!({
        "threads": 3, "vars": 3, "locks": 3, "events": 40, "p_critical_section": 0.8,
        "p_nested": 0.5, "p_write": 0.5, "p_sync": 0.2, "p_release": 0.3,
        "fork_join": false, "lock_affinity": false, "disciplined": false, "seed": 0
    });
    std::fs::write(&config, cfg.to_string()).unwrap();
    let repros = dir.path().join("repros");
    let (code, out, _) = run(&[
        "diff",
        "--seeds",
        "0..400",
        "--config",
        config.to_str().unwrap(),
        "--relations",
        "dc",
        "--mutant-read-share",
        "--repro-dir",
        repros.to_str().unwrap(),
    ]);
    let doc: Value = serde_json::from_str(&out).unwrap();
    let found = doc["disagreements"].as_array().unwrap().len();
    assert_eq!(code, if found > 0 { 1 } else { 0 });
    assert_eq!(
        std::fs::read_dir(&repros).map(|d| d.count()).unwrap_or(0),
        found
    );
}
