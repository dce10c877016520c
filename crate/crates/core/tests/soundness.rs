use lockstep::library::{self, ProtocolInstance};
use lockstep::scheduling::{replay, round_robin, seeded_random};
use lockstep::verifier::{explore, run, ExploreOptions, Outcome, TraceLine};
use proptest::prelude::*;

fn small_instances() -> Vec<ProtocolInstance> {
    vec![
        library::one_room_known(3).unwrap(),
        library::one_room_unknown(2, lockstep::Config(1)).unwrap(),
        library::two_switch_prisoner(2, 2).unwrap(),
        library::two_switch_room(2, 3).unwrap(),
        library::room_at_a_time_six(2, 2).unwrap(),
        library::three_config_prob1(2, 2).unwrap(),
        library::two_config_prob_eps(2, 2).unwrap(),
        library::mutant_two_switch_count(2, 2).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// A protocol the explorer calls safe never declares incorrectly in a
    /// random run, and an unsafe verdict is never contradicted by a run
    /// reaching a declaration the explorer did not see.
    #[test]
    fn random_runs_agree_with_the_explorer(which in 0usize..8, seed in any::<u64>()) {
        let inst = &small_instances()[which];
        let rep = explore(inst, ExploreOptions::for_instance(inst)).unwrap();
        let res = run(inst, &mut seeded_random(inst.n, inst.r, seed), inst.win, 3000);
        if rep.safe {
            prop_assert!(!matches!(res.outcome, Outcome::DeclaredIncorrect { .. }), "{}", res.outcome);
        }
        if rep.goal_states == 0 {
            let no_declaration = matches!(res.outcome, Outcome::StepLimit { .. });
            prop_assert!(no_declaration);
        }
    }

    #[test]
    fn trace_lines_round_trip_through_json(seed in any::<u64>(), steps in 1u64..200) {
        let inst = library::two_switch_prisoner(2, 3).unwrap();
        let res = run(&inst, &mut seeded_random(2, 3, seed), inst.win, steps);
        for rec in &res.trace {
            let line = TraceLine::from_record(&inst, rec);
            let json = line.to_json();
            prop_assert!(!json.contains('\n'));
            prop_assert_eq!(TraceLine::parse_json(&json).unwrap(), line);
        }
    }
}

#[test]
fn live_protocols_declare_correctly_under_round_robin() {
    for inst in small_instances().into_iter().take(5) {
        let res = run(&inst, &mut round_robin(inst.n, inst.r), inst.win, 100_000);
        assert!(res.outcome.is_correct(), "{}: {}", inst.id, res.outcome);
    }
}

#[test]
fn unsafe_counterexample_replays_to_an_incorrect_declaration() {
    let inst = library::mutant_two_switch_count(2, 2).unwrap();
    let rep = explore(&inst, ExploreOptions::for_instance(&inst)).unwrap();
    assert!(!rep.safe);
    let cx = rep.unsafe_trace.expect("counterexample");
    let events: Vec<_> = cx.trace.iter().map(|s| lockstep::VisitEvent { prisoner: s.prisoner, room: s.room }).collect();
    let len = events.len() as u64;
    let res = run(&inst, &mut replay(events, inst.n, inst.r, "cx"), inst.win, len);
    assert!(matches!(res.outcome, Outcome::DeclaredIncorrect { step, .. } if step == len), "{}", res.outcome);
    assert_eq!(res.trace, cx.trace);
}

#[test]
fn malformed_trace_line_is_an_error() {
    assert!(TraceLine::parse_json("{\"step\": 1}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn arbitrary_trace_lines_round_trip(
        step in any::<u64>(),
        prisoner in 0usize..1000,
        room in 0usize..1000,
        before in "\\PC{0,12}",
        after in "\\PC{0,12}",
        fired in any::<bool>(),
        declared in any::<bool>(),
    ) {
        let line = TraceLine { step, prisoner, room, config_before: before, config_after: after, fired, declared };
        let json = line.to_json();
        prop_assert_eq!(json.lines().count(), 1);
        prop_assert_eq!(TraceLine::parse_json(&json).unwrap(), line);
    }
}
