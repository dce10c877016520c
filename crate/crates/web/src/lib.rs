//! Browser bindings: each entry point takes plain arguments and returns a
//! JSON string, so the page needs no generated TypeScript types.

use lockstep::library::{build, Params, PROTOCOL_IDS};
use lockstep::monitors::monitors_for;
use lockstep::scheduling::{build_schedule_pair, compare_observations, dichotomy, simple_scheduler};
use lockstep::verifier::{explore, guarantee_holds, run, ExploreOptions, TraceLine};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Keeps the page responsive; larger instances belong on the CLI.
pub const WEB_NODE_CAP: usize = 200_000;
pub const WEB_MAX_STEPS: u64 = 5_000;

fn params(n: usize, r: usize) -> Params {
    Params::new(n, r)
}

pub fn protocols_json() -> String {
    json!(PROTOCOL_IDS).to_string()
}

pub fn simulate_json(protocol: &str, n: usize, r: usize, scheduler: &str, seed: u64, max_steps: u64) -> Result<Value, String> {
    let inst = build(protocol, &params(n, r)).map_err(|e| e.to_string())?;
    let mut sched = simple_scheduler(scheduler, n, r, seed).map_err(|e| e.to_string())?;
    let res = run(&inst, sched.as_mut(), inst.win, max_steps.min(WEB_MAX_STEPS));
    let trace: Vec<TraceLine> = res.trace.iter().map(|rec| TraceLine::from_record(&inst, rec)).collect();
    let rooms: Vec<&str> = res.world.rooms.iter().map(|&c| inst.name_of(c)).collect();
    Ok(json!({
        "protocol": inst.id,
        "outcome": res.outcome.to_string(),
        "correct": res.outcome.is_correct(),
        "rooms": rooms,
        "trace": trace,
    }))
}

pub fn verify_json(protocol: &str, n: usize, r: usize) -> Result<Value, String> {
    let inst = build(protocol, &params(n, r)).map_err(|e| e.to_string())?;
    let mut opts = ExploreOptions::for_instance(&inst).with_monitors(monitors_for(&inst));
    opts.node_cap = WEB_NODE_CAP;
    let rep = explore(&inst, opts).map_err(|e| e.to_string())?;
    let monitors: Vec<Value> = rep.monitors.iter().map(|m| json!({ "id": m.id, "passed": m.passed, "checks": m.checks })).collect();
    let counterexample = rep.unsafe_trace.as_ref().map(|cx| {
        cx.trace.iter().map(|rec| TraceLine::from_record(&inst, rec).to_text()).collect::<Vec<_>>()
    });
    Ok(json!({
        "protocol": rep.protocol,
        "guarantee": inst.guarantee.name(),
        "verified": guarantee_holds(&inst, &rep) && rep.monitors_pass(),
        "states": rep.states,
        "max_depth": rep.max_depth,
        "safe": rep.safe,
        "live": rep.live,
        "prob1": rep.prob1,
        "prob_eps": rep.prob_eps,
        "monitors": monitors,
        "counterexample": counterexample,
    }))
}

pub fn lemma1_json(protocol: &str, n: usize, r: usize, horizon: usize) -> Result<Value, String> {
    if r < 2 {
        return Err("the schedule pair needs at least two rooms".into());
    }
    let inst = build(protocol, &params(n, r)).map_err(|e| e.to_string())?;
    let pair = build_schedule_pair(&inst);
    let cmp = compare_observations(&inst, &pair, horizon.min(WEB_MAX_STEPS as usize));
    let d = dichotomy(&inst, &pair, WEB_MAX_STEPS);
    Ok(json!({
        "protocol": inst.id,
        "c": inst.name_of(pair.c),
        "d": inst.name_of(pair.d),
        "cycle_length": pair.cycle_length,
        "events": cmp.events,
        "identical": cmp.identical,
        "pointer_advances": cmp.pointer_advances,
        "rooms_visited_by_s2": cmp.rooms_visited_by_s2,
        "s1": d.s1.to_string(),
        "extended": d.extended.map(|o| o.to_string()),
        "s2": d.s2.map(|o| o.to_string()),
        "dichotomy_manifested": d.manifested(),
    }))
}

fn respond(v: Result<Value, String>) -> String {
    match v {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen]
pub fn protocols() -> String {
    protocols_json()
}

#[wasm_bindgen]
pub fn simulate(protocol: &str, n: usize, r: usize, scheduler: &str, seed: u64, max_steps: u64) -> String {
    respond(simulate_json(protocol, n, r, scheduler, seed, max_steps))
}

#[wasm_bindgen]
pub fn verify(protocol: &str, n: usize, r: usize) -> String {
    respond(verify_json(protocol, n, r))
}

#[wasm_bindgen]
pub fn lemma1(protocol: &str, n: usize, r: usize, horizon: usize) -> String {
    respond(lemma1_json(protocol, n, r, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn simulate_round_robin_one_room() {
        let v = parse(simulate("one-room-known", 3, 1, "round-robin", 0, 100));
        assert_eq!(v["correct"], true);
        assert!(!v["trace"].as_array().unwrap().is_empty());
    }

    #[test]
    fn verify_two_switch() {
        let v = parse(verify("two-switch-prisoner", 2, 2));
        assert_eq!(v["verified"], true);
        assert_eq!(v["safe"], true);
        assert!(v["monitors"].as_array().unwrap().iter().all(|m| m["passed"] == true));
    }

    #[test]
    fn verify_mutant_reports_counterexample() {
        let v = parse(verify("mutant-two-switch-count", 2, 2));
        assert_eq!(v["verified"], false);
        assert!(!v["counterexample"].as_array().unwrap().is_empty());
    }

    #[test]
    fn lemma1_logs_identical() {
        let v = parse(lemma1("two-switch-prisoner", 2, 2, 500));
        assert_eq!(v["identical"], true);
        assert_eq!(v["dichotomy_manifested"], true);
    }

    #[test]
    fn errors_are_json() {
        let v = parse(verify("no-such-protocol", 2, 2));
        assert!(v["error"].as_str().unwrap().contains("no-such-protocol"));
        let v = parse(lemma1("two-switch-prisoner", 2, 1, 10));
        assert!(v.get("error").is_some());
        assert!(parse(protocols()).as_array().unwrap().len() > 10);
    }
}
