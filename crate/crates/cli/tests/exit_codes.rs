use std::process::{Command, Output};

fn lockstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lockstep")).args(args).env_remove("LOCKSTEP_NODE_CAP").output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    lockstep(args).status.code().expect("exit code")
}

#[test]
fn simulate_exit_codes() {
    assert_eq!(code(&["simulate", "--protocol", "one-room-known", "--n", "5", "--scheduler", "round-robin", "--max-steps", "100"]), 0);
    assert_eq!(code(&["simulate", "--protocol", "two-config-prob-eps", "--n", "2", "--r", "2", "--scheduler", "witness"]), 0);
    assert_eq!(code(&["simulate", "--protocol", "one-room-known", "--n", "5", "--max-steps", "3"]), 3);
    assert_eq!(code(&["simulate", "--protocol", "no-such-protocol"]), 64);
    assert_eq!(code(&["simulate", "--protocol", "one-room-known", "--scheduler", "no-such-scheduler"]), 64);
    assert_eq!(code(&["simulate", "--bogus-flag"]), 64);
}

#[test]
fn incorrect_declaration_exits_two() {
    let args = ["simulate", "--protocol", "at-least-one-room", "--n", "2", "--r", "3", "--win", "all-rooms", "--scheduler", "random", "--seed", "25"];
    assert_eq!(code(&args), 2);
}

#[test]
fn mutant_fails_verification_with_a_trace() {
    let out = lockstep(&["verify", "--protocol", "mutant-two-switch-count"]);
    assert_eq!(out.status.code(), Some(65));
    let text = String::from_utf8(out.stdout).unwrap();
    let trace = text
        .lines()
        .skip_while(|l| !l.starts_with("counterexample (IncorrectDeclaration)"))
        .skip(1)
        .take_while(|l| l.starts_with("  "))
        .count();
    assert!(trace > 0, "{text}");
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&["verify", "--protocol", "two-switch-prisoner", "--n", "2", "--r", "2"]), 0);
    assert_eq!(code(&["verify", "--protocol", "two-switch-room", "--n", "2", "--r", "4"]), 64);
    assert_eq!(code(&["verify", "--protocol", "knowledge-3config"]), 0);
    assert_eq!(code(&["verify", "--protocol", "mutant-knowledge-no-prepend"]), 65);
    assert_eq!(code(&["verify", "--protocol", "two-switch-prisoner", "--node-cap", "10"]), 70);
    let out = Command::new(env!("CARGO_BIN_EXE_lockstep"))
        .args(["verify", "--protocol", "two-switch-prisoner"])
        .env("LOCKSTEP_NODE_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(70));
}

#[test]
fn verify_report_lines_name_every_property() {
    let out = lockstep(&["verify", "--protocol", "two-switch-prisoner", "--n", "2", "--r", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for prop in ["safe", "live", "prob1", "prob_eps", "two-switch-disjunction", "two-switch-count"] {
        let want = format!("property={prop} verdict=true");
        assert!(text.contains(&want), "missing {want} in\n{text}");
    }
}

#[test]
fn adversary_exit_codes() {
    assert_eq!(code(&["adversary", "lemma1", "--protocol", "two-switch-prisoner", "--n", "2", "--r", "2", "--horizon", "500"]), 0);
    assert_eq!(code(&["adversary", "s1", "--protocol", "one-room-known-per-room", "--n", "2", "--r", "5", "--max-steps", "10000"]), 0);
    assert_eq!(code(&["adversary", "lemma1", "--protocol", "two-switch-prisoner", "--r", "1"]), 64);
    assert_eq!(code(&["adversary", "s1", "--protocol", "one-room-known-per-room", "--n", "2", "--r", "3"]), 64);
}

#[test]
fn jsonl_output_is_parseable_and_deterministic() {
    let args = ["simulate", "--protocol", "two-switch-prisoner", "--n", "3", "--r", "2", "--scheduler", "random", "--seed", "11", "--format", "jsonl"];
    let a = lockstep(&args);
    let b = lockstep(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut last_step = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for field in ["step", "prisoner", "room", "config_before", "config_after", "fired", "declared"] {
            assert!(v.get(field).is_some(), "{field} missing from {line}");
        }
        last_step = v["step"].as_u64().unwrap();
    }
    assert!(last_step > 0);
}
