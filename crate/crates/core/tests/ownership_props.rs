use lockstep::ownership::{ObservedEvent, OwnershipTable};
use lockstep::Config;
use proptest::prelude::*;

/// Every assignment of events to rooms, checked one tuple at a time.
fn naive_ownership(start: &[Config], history: &[ObservedEvent], n: usize, m: usize) -> Vec<Vec<bool>> {
    let r = start.len();
    let total = r.pow(history.len() as u32);
    let mut result = vec![vec![true; m]; n];
    let mut consistent = 0;
    for code in 0..total {
        let mut rooms = start.to_vec();
        let mut visited = vec![vec![false; r]; n];
        let mut c = code;
        let mut ok = true;
        for e in history {
            let room = c % r;
            c /= r;
            if rooms[room] != e.config_in {
                ok = false;
                break;
            }
            rooms[room] = e.config_out;
            visited[e.prisoner][room] = true;
        }
        if !ok {
            continue;
        }
        consistent += 1;
        for p in 0..n {
            for cfg in 0..m {
                if (0..r).any(|i| rooms[i].index() == cfg && !visited[p][i]) {
                    result[p][cfg] = false;
                }
            }
        }
    }
    assert!(consistent > 0, "generated history must be realizable");
    result
}

/// A realizable history: a concrete run with rooms then forgotten.
fn history(n: usize, m: usize) -> impl Strategy<Value = (Vec<Config>, Vec<ObservedEvent>)> {
    (1usize..=4)
        .prop_flat_map(move |r| {
            (
                proptest::collection::vec(0..m as u8, r),
                proptest::collection::vec((0..n, 0..r, 0..m as u8), 0..=7),
            )
        })
        .prop_map(|(start, steps)| {
            let start: Vec<Config> = start.into_iter().map(Config).collect();
            let mut rooms = start.clone();
            let events = steps
                .into_iter()
                .map(|(prisoner, room, out)| {
                    let e = ObservedEvent { prisoner, config_in: rooms[room], config_out: Config(out) };
                    rooms[room] = Config(out);
                    e
                })
                .collect();
            (start, events)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn incremental_table_matches_enumeration_two_configs((start, h) in history(2, 2)) {
        let t = OwnershipTable::replay(2, 2, &start, &h).unwrap();
        prop_assert_eq!(t.owns_matrix(), naive_ownership(&start, &h, 2, 2));
    }

    #[test]
    fn incremental_table_matches_enumeration_three_configs((start, h) in history(3, 3)) {
        let t = OwnershipTable::replay(3, 3, &start, &h).unwrap();
        prop_assert_eq!(t.owns_matrix(), naive_ownership(&start, &h, 3, 3));
    }

    #[test]
    fn room_counts_track_the_run((start, h) in history(2, 3)) {
        let t = OwnershipTable::replay(2, 3, &start, &h).unwrap();
        prop_assert_eq!(t.rooms() as usize, start.len());
    }
}
