//! The acceptance suite: eleven criteria with pinned thresholds, shared by
//! the `acceptance` test target and `lockstep verify --suite acceptance`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::library::{self, ProtocolInstance};
use crate::monitors::monitor_by_id;
use crate::ownership::{provable_ownership_bruteforce, ObservedEvent, OwnershipTable};
use crate::protocol::Config;
use crate::scheduling::{build_schedule_pair, compare_observations, dichotomy, prob_eps_witness, replay, round_robin, run_s1, RoundRobin};
use crate::transcript::{forged_alphabet, prefixes_up_to, run_transcript, search_prefixes};
use crate::verifier::{check_knowledge, default_node_cap, explore, run, ExploreOptions, ExploreReport};
use crate::world::WinCondition;

pub const STATE_LIMIT: usize = 10_000_000;
pub const LEMMA1_LOG_EVENTS: usize = 500;
pub const DICHOTOMY_STEPS: u64 = 10_000;
pub const S1_EVENTS: u64 = 10_000;
pub const S1_RANDOM_HISTORIES: usize = 1000;
pub const S1_HISTORY_MAX_LEN: usize = 12;
pub const TRANSCRIPT_RR_STEPS: u64 = 90;
pub const TRANSCRIPT_PREFIX_LEN: usize = 3;
pub const TRANSCRIPT_DEPTH: usize = 6;

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub number: u8,
    pub title: &'static str,
    pub passed: bool,
    pub budget: Duration,
    pub elapsed: Duration,
    pub details: Vec<String>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2}: {} ({:.2}s, budget {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.number,
            self.title,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Collects sub-check outcomes for one criterion.
struct Checks {
    ok: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Checks {
        Checks { ok: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.ok &= ok;
        self.details.push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }

    fn error(&mut self, what: &str, e: crate::error::Error) {
        self.check(false, format!("{what}: {e}"));
    }
}

fn verdicts(rep: &ExploreReport) -> String {
    let live = rep.live.map_or("n/a".to_string(), |b| b.to_string());
    let mut s = format!(
        "{}: safe={} live={live} prob1={} prob_eps={} states={} depth={}",
        rep.protocol, rep.safe, rep.prob1, rep.prob_eps, rep.states, rep.max_depth
    );
    for m in &rep.monitors {
        s.push_str(&format!(" {}={}", m.id, m.passed));
    }
    s
}

fn explore_with(inst: &ProtocolInstance, monitors: &[&str]) -> Result<ExploreReport> {
    let mut ms = Vec::new();
    for id in monitors {
        ms.push(monitor_by_id(id, inst)?);
    }
    let mut opts = ExploreOptions::for_instance(inst).with_monitors(ms);
    opts.node_cap = default_node_cap().min(STATE_LIMIT);
    explore(inst, opts)
}

fn safe_live(c: &mut Checks, inst: Result<ProtocolInstance>, monitors: &[&str]) {
    match inst.and_then(|i| explore_with(&i, monitors)) {
        Ok(rep) => {
            let ok = rep.safe && rep.live == Some(true) && rep.monitors_pass() && rep.states <= STATE_LIMIT;
            c.check(ok, verdicts(&rep));
        }
        Err(e) => c.error("explore", e),
    }
}

fn criterion(number: u8, title: &'static str, budget_secs: u64, body: impl FnOnce(&mut Checks)) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    body(&mut c);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    if elapsed > budget {
        c.check(false, format!("took {:.2}s, over the {budget_secs}s budget", elapsed.as_secs_f64()));
    }
    CriterionReport { number, title, passed: c.ok, budget, elapsed, details: c.details }
}

pub fn c1_one_room() -> CriterionReport {
    criterion(1, "one-room protocol is safe and live for n in {1,2,3,5}", 1, |c| {
        for n in [1, 2, 3, 5] {
            safe_live(c, library::one_room_known(n), &[]);
        }
    })
}

pub fn c2_unknown_start() -> CriterionReport {
    criterion(2, "unknown-start one-room protocol is safe and live", 1, |c| {
        for n in [2, 3] {
            for start in [0, 1] {
                safe_live(c, library::one_room_unknown(n, Config(start)), &[]);
            }
        }
    })
}

pub fn c3_two_switch() -> CriterionReport {
    criterion(3, "two-switch prisoner-at-a-time: safe, live, invariant and count", 4 * 60, |c| {
        for n in [2, 3] {
            for r in [2, 3] {
                let t = Instant::now();
                safe_live(c, library::two_switch_prisoner(n, r), &["two-switch-disjunction", "two-switch-count"]);
                let secs = t.elapsed().as_secs_f64();
                c.check(secs < 60.0, format!("n={n} r={r} explored in {secs:.2}s"));
            }
        }
    })
}

pub fn c4_room_at_a_time() -> CriterionReport {
    criterion(4, "room-at-a-time protocols: safe, live, phase invariants", 60, |c| {
        for n in [2, 3] {
            safe_live(c, library::room_at_a_time_six(n, 3), &["six-done"]);
            safe_live(c, library::two_switch_room(n, 3), &["room-phase"]);
        }
    })
}

pub fn c5_arbitrary_start() -> CriterionReport {
    criterion(5, "arbitrary-start wrapper: all 16 start assignments at n=2 r=2", 5 * 60, |c| {
        let base = match library::two_switch_prisoner(2, 2) {
            Ok(b) => b,
            Err(e) => return c.error("base", e),
        };
        let mut passed = 0;
        for a in 0..4u8 {
            for b in 0..4u8 {
                let inst = library::arbitrary_start_wrapper(&base, &[Config(a), Config(b)]);
                match inst.and_then(|i| explore_with(&i, &[])) {
                    Ok(rep) if rep.safe && rep.live == Some(true) => passed += 1,
                    Ok(rep) => c.check(false, verdicts(&rep)),
                    Err(e) => c.error("explore", e),
                }
            }
        }
        c.check(passed == 16, format!("{passed}/16 start assignments safe and live"));
    })
}

pub fn c6_lemma1() -> CriterionReport {
    criterion(6, "indistinguishable schedule pair and the unknown-start dichotomy", 10, |c| {
        let inst = match library::two_switch_prisoner(2, 2) {
            Ok(i) => i,
            Err(e) => return c.error("base", e),
        };
        let pair = build_schedule_pair(&inst);
        let cmp = compare_observations(&inst, &pair, LEMMA1_LOG_EVENTS);
        c.check(
            cmp.identical,
            format!(
                "C={} D={} cycle={} passes; logs identical over {} events; s2 advanced {} times over {} rooms",
                inst.name_of(pair.c),
                inst.name_of(pair.d),
                pair.cycle_length,
                cmp.events,
                cmp.pointer_advances,
                cmp.rooms_visited_by_s2
            ),
        );
        c.check(cmp.rooms_visited_by_s2 == inst.r, format!("s2 visits {} of {} rooms", cmp.rooms_visited_by_s2, inst.r));
        let d = dichotomy(&inst, &pair, DICHOTOMY_STEPS);
        c.check(d.manifested(), format!("s1: {}; extended: {:?}; s2: {:?}", d.s1, d.extended, d.s2));
    })
}

/// Random consistent observed histories from a concrete room evolution.
pub fn random_history(rng: &mut ChaCha8Rng, n: usize, m: usize, start: &[Config], len: usize) -> Vec<ObservedEvent> {
    let mut rooms = start.to_vec();
    (0..len)
        .map(|_| {
            let prisoner = rng.gen_range(0..n);
            let room = rng.gen_range(0..rooms.len());
            let out = if rng.gen_bool(0.5) { rooms[room] } else { Config(rng.gen_range(0..m) as u8) };
            let ev = ObservedEvent { prisoner, config_in: rooms[room], config_out: out };
            rooms[room] = out;
            ev
        })
        .collect()
}

pub fn c7_single_switch() -> CriterionReport {
    criterion(7, "single-switch adversary defeats strategies at n=2 r=5", 4 * 30, |c| {
        let strategies = [
            library::one_room_known_per_room(2, 5),
            library::one_room_unknown_per_room(2, 5, Config(0)),
            library::at_least_one_room(2, 5).map(|mut i| {
                i.win = WinCondition::default();
                i
            }),
            library::two_config_prob_eps(2, 5),
        ];
        for inst in strategies {
            let t = Instant::now();
            match inst.and_then(|i| run_s1(&i, S1_EVENTS).map(|rep| (i, rep))) {
                Ok((i, rep)) => {
                    let ok = !rep.protocol_won && rep.invariant_ok && rep.fairness_ok && t.elapsed().as_secs() < 30;
                    let witness = rep.witness.as_ref().map_or("none".to_string(), |w| {
                        format!("p{} never entered room {} ({} events, {})", w.prisoner, w.room, w.schedule.len(), w.replay)
                    });
                    c.check(
                        ok,
                        format!(
                            "{}: {}; invariant={} fairness={} direct={} forced={} witness: {witness}",
                            i.id, rep.outcome, rep.invariant_ok, rep.fairness_ok, rep.direct_count, rep.case4_count
                        ),
                    );
                }
                Err(e) => c.error("adversary", e),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let start = vec![Config(0); 5];
        let mut agree = 0;
        for _ in 0..S1_RANDOM_HISTORIES {
            let len = rng.gen_range(0..=S1_HISTORY_MAX_LEN);
            let h = random_history(&mut rng, 2, 2, &start, len);
            let table = OwnershipTable::replay(2, 2, &start, &h).map(|t| t.owns_matrix());
            let oracle = provable_ownership_bruteforce(&start, &h, 2, 2);
            if let (Ok(a), Ok(b)) = (table, oracle) {
                agree += usize::from(a == b);
            }
        }
        c.check(agree == S1_RANDOM_HISTORIES, format!("incremental ownership = brute force on {agree}/{S1_RANDOM_HISTORIES} histories"));
    })
}

pub fn c8_prob1() -> CriterionReport {
    criterion(8, "three-configuration protocol wins with probability 1", 5 * 60, |c| {
        match library::three_config_prob1(2, 2).and_then(|i| explore_with(&i, &["prob1-phases"])) {
            Ok(rep) => c.check(rep.safe && rep.prob1 && rep.monitors_pass() && rep.states <= STATE_LIMIT, verdicts(&rep)),
            Err(e) => c.error("explore", e),
        }
    })
}

pub fn c9_prob_eps() -> CriterionReport {
    criterion(9, "two-configuration protocol wins with probability epsilon", 5 * 60, |c| {
        let inst = match library::two_config_prob_eps(2, 2) {
            Ok(i) => i,
            Err(e) => return c.error("build", e),
        };
        match explore_with(&inst, &["imbalance"]) {
            Ok(rep) => c.check(rep.safe && rep.prob_eps && !rep.prob1 && rep.monitors_pass(), verdicts(&rep)),
            Err(e) => c.error("explore", e),
        }
        let events = prob_eps_witness(inst.n, inst.r);
        let len = events.len() as u64;
        let res = run(&inst, &mut replay(events, inst.n, inst.r, "witness"), inst.win, len);
        c.check(res.outcome.is_correct() && res.outcome.step() <= len, format!("witness schedule of {len} events: {}", res.outcome));
    })
}

pub fn c10_corner_cases() -> CriterionReport {
    criterion(10, "corner cases and problem variants", 10 * 60, |c| {
        for n in [2, 3] {
            safe_live(c, library::two_rooms_three_configs(n), &[]);
        }
        match library::three_config_knowledge(2, 2).and_then(|i| check_knowledge(&i, STATE_LIMIT)) {
            Ok(k) => c.check(k.passed(), format!("knowledge-3config(2,2): sound={} eventual={} states={}", k.sound, k.eventual, k.states)),
            Err(e) => c.error("knowledge", e),
        }
        let events = (0..).map(|t| RoundRobin::event_at(3, 3, t));
        let (outcome, _) = run_transcript(3, 3, vec![vec![]; 3], events, TRANSCRIPT_RR_STEPS);
        c.check(outcome.is_correct(), format!("transcript n=3 r=3 round-robin: {outcome}"));
        let prefixes = prefixes_up_to(&forged_alphabet(2, 2), TRANSCRIPT_PREFIX_LEN);
        let s = search_prefixes(2, 2, &prefixes, TRANSCRIPT_DEPTH);
        c.check(
            s.safe(),
            format!(
                "transcript n=2 r=2: {} prefix pairs, {} schedules of depth {TRANSCRIPT_DEPTH}, {} declarations, none incorrect",
                s.prefix_sets, s.schedules, s.declarations
            ),
        );
        for r in [2, 3] {
            match library::two_switch_room(2, r).and_then(|b| library::with_multiple_declarations(&b)) {
                Ok(inst) => safe_live(c, Ok(inst), &[]),
                Err(e) => c.details.push(format!("n/a  multi-declare n=2 r={r}: {e}")),
            }
            let base = library::two_switch_prisoner(2, r);
            safe_live(c, base.clone().and_then(|b| library::with_repeated_entries(&b, 2)), &["two-switch-count"]);
            safe_live(c, base.and_then(|b| library::forced_flip_transform(&b)), &[]);
        }
        let rr = run(
            &library::with_multiple_declarations(&library::two_switch_room(2, 3).expect("odd r")).expect("base"),
            &mut round_robin(2, 3),
            WinCondition::AllMustDeclare,
            10_000,
        );
        c.check(rr.outcome.is_correct() && rr.world.all_declared(), format!("multi-declare n=2 r=3 round-robin: {}", rr.outcome));
    })
}

pub fn c11_mutations() -> CriterionReport {
    criterion(11, "documented mutations are caught with counterexample traces", 5 * 60, |c| {
        match library::mutant_two_switch_count(2, 2).and_then(|i| explore_with(&i, &["two-switch-count"])) {
            Ok(rep) => {
                let m = rep.monitor("two-switch-count").and_then(|m| m.counterexample.as_ref());
                let trace = rep.unsafe_trace.as_ref().or(m).map_or(0, |t| t.trace.len());
                c.check((!rep.safe || !rep.monitors_pass()) && trace > 0, format!("{} ; trace of {trace} steps", verdicts(&rep)));
            }
            Err(e) => c.error("explore", e),
        }
        match library::mutant_prob1_no_see(2, 2).and_then(|i| explore_with(&i, &["prob1-phases"])) {
            Ok(rep) => {
                let m = rep.monitor("prob1-phases").and_then(|m| m.counterexample.as_ref());
                let cx = rep.unsafe_trace.as_ref().or(rep.stuck_trace.as_ref()).or(m);
                let trace = cx.map_or(0, |t| t.trace.len());
                let caught = !rep.safe || !rep.prob1 || !rep.monitors_pass();
                c.check(caught && trace > 0, format!("{} ; trace of {trace} steps", verdicts(&rep)));
            }
            Err(e) => c.error("explore", e),
        }
        match library::mutant_knowledge_no_prepend(2, 2).and_then(|i| check_knowledge(&i, STATE_LIMIT)) {
            Ok(k) => {
                let trace = k.counterexample.as_ref().map_or(0, |t| t.trace.len());
                c.check(!k.passed() && k.counterexample.is_some(), format!("knowledge without prepend: sound={} eventual={} ; trace of {trace} steps", k.sound, k.eventual));
            }
            Err(e) => c.error("knowledge", e),
        }
    })
}

pub type CriterionFn = fn() -> CriterionReport;

pub const CRITERIA: [CriterionFn; 11] = [
    c1_one_room,
    c2_unknown_start,
    c3_two_switch,
    c4_room_at_a_time,
    c5_arbitrary_start,
    c6_lemma1,
    c7_single_switch,
    c8_prob1,
    c9_prob_eps,
    c10_corner_cases,
    c11_mutations,
];

pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().map(|f| f()).collect()
}
