use lockstep::library::{self, ProtocolInstance};
use lockstep::scheduling::{build_schedule_pair, replay, run_s1, s1_adversary, window_fair};
use lockstep::verifier::{run, Outcome};
use lockstep::world::{StepRecord, WinCondition};
use lockstep::{Config, VisitEvent};

fn per_prisoner(n: usize, trace: &[StepRecord]) -> Vec<Vec<(Config, Config)>> {
    let mut out = vec![Vec::new(); n];
    for s in trace {
        out[s.prisoner].push((s.config_before, s.config_after));
    }
    out
}

fn observed(trace: &[StepRecord]) -> Vec<(usize, Config, Config)> {
    trace.iter().map(|s| (s.prisoner, s.config_before, s.config_after)).collect()
}

#[test]
fn schedule_pair_is_indistinguishable_and_s2_covers_every_room() {
    for (n, r) in [(2, 2), (2, 3), (3, 2)] {
        let base = library::two_switch_prisoner(n, r).unwrap();
        let pair = build_schedule_pair(&base);
        let inst = pair.instance(&base);
        let a = run(&inst, &mut pair.s1(), inst.win, 600);
        let b = run(&inst, &mut pair.s2(), inst.win, 600);
        assert_eq!(a.outcome, b.outcome, "n={n} r={r}");
        assert_eq!(per_prisoner(n, &a.trace), per_prisoner(n, &b.trace), "n={n} r={r}");
        assert!(a.trace.iter().all(|s| s.room == 0));
        if let Outcome::StepLimit { .. } = b.outcome {
            let mut rooms: Vec<usize> = b.trace.iter().map(|s| s.room).collect();
            rooms.sort_unstable();
            rooms.dedup();
            assert_eq!(rooms.len(), r, "n={n} r={r}");
        }
    }
}

fn s1_targets() -> Vec<ProtocolInstance> {
    vec![
        library::one_room_known_per_room(2, 5).unwrap(),
        library::one_room_unknown_per_room(2, 5, Config(0)).unwrap(),
        ProtocolInstance { win: WinCondition::default(), ..library::at_least_one_room(2, 5).unwrap() },
    ]
}

#[test]
fn s1_witness_is_consistent_with_what_the_prisoners_saw() {
    for inst in s1_targets() {
        let rep = run_s1(&inst, 10_000).unwrap();
        assert!(!rep.protocol_won, "{}", inst.id);
        let w = rep.witness.expect("declaration yields a witness");
        assert!(!w.schedule.contains(&VisitEvent { prisoner: w.prisoner, room: w.room }));

        let len = w.schedule.len() as u64;
        let refuted = run(&inst, &mut replay(w.schedule.clone(), inst.n, inst.r, "witness"), inst.win, len);
        assert!(matches!(refuted.outcome, Outcome::DeclaredIncorrect { .. }), "{}: {}", inst.id, refuted.outcome);

        let mut adv = s1_adversary(&inst).unwrap();
        let actual = run(&inst, &mut adv, inst.win, 10_000);
        assert!(actual.outcome.is_correct() || matches!(actual.outcome, Outcome::DeclaredIncorrect { .. }));
        if w.dropped_after_finish.is_none() {
            assert_eq!(observed(&refuted.trace), observed(&actual.trace), "{}", inst.id);
        }
    }
}

#[test]
fn s1_keeps_every_pair_recurring() {
    let inst = library::two_config_prob_eps(2, 5).unwrap();
    let mut adv = s1_adversary(&inst).unwrap();
    let res = run(&inst, &mut adv, inst.win, 4000);
    assert!(matches!(res.outcome, Outcome::StepLimit { .. }));
    assert!(adv.invariant_ok);
    let events: Vec<_> = res.trace.iter().map(|s| VisitEvent { prisoner: s.prisoner, room: s.room }).collect();
    let mut seen = [[false; 5]; 2];
    for e in &events[2000..] {
        seen[e.prisoner][e.room] = true;
    }
    assert!(seen.iter().flatten().all(|&s| s));
    assert!(window_fair(&events[2000..], 2, 5, 2000));
}

#[test]
fn s1_rejects_parameters_outside_its_domain() {
    assert!(s1_adversary(&library::one_room_known_per_room(2, 4).unwrap()).is_err());
    assert!(s1_adversary(&library::three_config_prob1(2, 5).unwrap()).is_err());
}
