//! End-to-end checks of the `ecf` binary: exit codes, report determinism,
//! record/replay round trips, and the decide/oracle/bench commands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn ecf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn run_prints_final_store_and_exits_zero() {
    let scenario = corpus().join("dao_attack/scenario.json");
    let out = ecf(&["run", scenario.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["finalStore"]["dao"]["balance"], 0);
    assert_eq!(doc["finalStore"]["attacker"]["loot"], 200);
}

#[test]
fn empty_scenario_echoes_initial_store() {
    let scenario = corpus().join("empty/scenario.json");
    let out = ecf(&["run", scenario.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["executions"], 0);
}

#[test]
fn aborting_scenario_exits_two() {
    let scenario = corpus().join("assert_abort/scenario.json");
    let out = ecf(&["run", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spin.pl"),
        "contract spin { enter { while 1 { skip; } } }",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("scenario.json"),
        r#"{"contracts": ["spin.pl"], "calls": [{"target": "spin", "arg": 0}], "stepBudget": 1000}"#,
    )
    .unwrap();
    let out = ecf(&["run", dir.path().join("scenario.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn monitor_exit_codes_follow_verdicts() {
    let attack = corpus().join("dao_attack/scenario.json");
    let out = ecf(&["monitor", attack.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("NotECF"));

    let fixed = corpus().join("dao_fixed_attack/scenario.json");
    let out = ecf(&["monitor", fixed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn prevent_mode_reverts_rejected_executions() {
    let attack = corpus().join("dao_attack/scenario.json");
    let out = ecf(&[
        "monitor",
        attack.to_str().unwrap(),
        "--mode",
        "prevent",
        "--format",
        "text",
    ]);
    assert_eq!(out.status.code(), Some(1));
    // The drain was rejected and rolled back: pre-attack balances survive.
    let text = stdout(&out);
    assert!(text.contains(r#""balance":200"#), "{text}");
    assert!(text.contains(r#""loot":0"#), "{text}");
}

#[test]
fn reports_are_deterministic_and_replay_matches() {
    let dir = tempfile::tempdir().unwrap();
    let attack = corpus().join("dao_attack/scenario.json");
    let trace = dir.path().join("attack.trace.json");
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    let r3 = dir.path().join("r3.json");

    let out = ecf(&[
        "monitor",
        attack.to_str().unwrap(),
        "--record",
        trace.to_str().unwrap(),
        "--report",
        r1.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = ecf(&[
        "monitor",
        attack.to_str().unwrap(),
        "--report",
        r2.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        std::fs::read(&r1).unwrap(),
        std::fs::read(&r2).unwrap(),
        "repeated runs must produce byte-identical reports"
    );

    let out = ecf(&[
        "replay",
        trace.to_str().unwrap(),
        "--report",
        r3.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        std::fs::read(&r1).unwrap(),
        std::fs::read(&r3).unwrap(),
        "replaying the recorded trace must reproduce the report"
    );
}

#[test]
fn oracle_command_agrees_with_the_monitor() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.json");

    let attack = corpus().join("dao_attack/scenario.json");
    ecf(&[
        "run",
        attack.to_str().unwrap(),
        "--record",
        trace.to_str().unwrap(),
    ]);
    let out = ecf(&["oracle", "--trace", trace.to_str().unwrap(), "--object", "dao"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");

    let fixed = corpus().join("dao_fixed_attack/scenario.json");
    ecf(&[
        "run",
        fixed.to_str().unwrap(),
        "--record",
        trace.to_str().unwrap(),
    ]);
    let witness = dir.path().join("witness.json");
    let out = ecf(&[
        "oracle",
        "--trace",
        trace.to_str().unwrap(),
        "--object",
        "dao",
        "--witness",
        witness.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(witness.is_file());

    // Final-state oracle over the same trace needs the context.
    let out = ecf(&[
        "oracle",
        "--trace",
        trace.to_str().unwrap(),
        "--object",
        "dao",
        "--fs",
        "--domain",
        "0,100,200",
        "--scenario",
        fixed.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
}

#[test]
fn decide_command_exit_codes() {
    let buggy = corpus().join("secf_vault_buggy/decider.json");
    let dir = tempfile::tempdir().unwrap();
    let cex = dir.path().join("cex.trace.json");
    let out = ecf(&[
        "decide",
        buggy.to_str().unwrap(),
        "--cex",
        cex.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["verdict"], "NotSecf");
    assert_eq!(doc["replayRejected"], true);
    assert!(cex.is_file());
    // The emitted counterexample replays to a rejection.
    let out = ecf(&["replay", cex.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let fixed = corpus().join("secf_vault_fixed/decider.json");
    let out = ecf(&["decide", fixed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bench_emits_csv_rows() {
    let out = ecf(&[
        "bench",
        "--invocations",
        "4",
        "--segments",
        "100,200",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("n,m,time_ns,memory_items"));
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn parallel_scenarios_keep_input_order() {
    let a = corpus().join("dao_attack/scenario.json");
    let f = corpus().join("dao_fixed_attack/scenario.json");
    let l = corpus().join("lock_pattern/scenario.json");
    let run =
        |extra: &[&str]| {
            let mut args = vec![
                "run",
                a.to_str().unwrap(),
                f.to_str().unwrap(),
                l.to_str().unwrap(),
                "--format",
                "json",
            ];
            args.extend_from_slice(extra);
            stdout(&ecf(&args))
        };
    assert_eq!(run(&[]), run(&["--parallel", "3"]));
}
