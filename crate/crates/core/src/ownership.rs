//! Observed histories and provable ownership.
//!
//! A prisoner *owns* configuration `c` when it has visited every room
//! currently in `c`; it *provably* owns `c` when that holds in every visit
//! sequence consistent with the observed history. Configurations with no
//! rooms are owned by everyone.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::ProtocolInstance;
use crate::protocol::Config;
use crate::world::{StepRecord, WorldState};

pub use crate::protocol::is_finished;

/// One prisoner entering one (unnamed) room.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedEvent {
    pub prisoner: usize,
    pub config_in: Config,
    pub config_out: Config,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OwnershipTable {
    pub n: usize,
    pub m: usize,
    pub room_counts: Vec<u32>,
    /// Row-major prisoner x config.
    pub owns: Vec<bool>,
    pub finished: Vec<bool>,
    events: usize,
}

impl OwnershipTable {
    pub fn new(n: usize, m: usize, start: &[Config]) -> Result<OwnershipTable> {
        let mut room_counts = vec![0u32; m];
        for c in start {
            if c.index() >= m {
                return Err(Error::HistoryCorruption { index: 0, reason: format!("start config {c} >= {m}") });
            }
            room_counts[c.index()] += 1;
        }
        let owns = (0..n * m).map(|i| room_counts[i % m] == 0).collect();
        Ok(OwnershipTable { n, m, room_counts, owns, finished: vec![false; n], events: 0 })
    }

    /// A table with the given counts and ownership, as after some history.
    pub fn from_parts(n: usize, m: usize, room_counts: Vec<u32>, owns: Vec<bool>) -> OwnershipTable {
        OwnershipTable { n, m, room_counts, owns, finished: vec![false; n], events: 0 }
    }

    pub fn owns(&self, prisoner: usize, c: Config) -> bool {
        self.owns[prisoner * self.m + c.index()]
    }

    pub fn owns_all(&self, prisoner: usize) -> bool {
        self.owns[prisoner * self.m..(prisoner + 1) * self.m].iter().all(|&o| o)
    }

    pub fn everyone_owns_all(&self) -> bool {
        self.owns.iter().all(|&o| o)
    }

    /// Rooms are not named in the history, so only counts per config are known.
    pub fn rooms(&self) -> u32 {
        self.room_counts.iter().sum()
    }

    /// Apply one event; loss is applied before gain.
    pub fn apply_event(&mut self, event: ObservedEvent) -> Result<()> {
        let index = self.events;
        let ObservedEvent { prisoner: q, config_in: a, config_out: b } = event;
        if q >= self.n || a.index() >= self.m || b.index() >= self.m {
            return Err(Error::HistoryCorruption { index, reason: "index out of range".into() });
        }
        if self.room_counts[a.index()] == 0 {
            return Err(Error::HistoryCorruption { index, reason: format!("no room is in config {a}") });
        }
        let m = self.m;
        if a != b {
            for p in (0..self.n).filter(|&p| p != q) {
                if !self.owns[p * m + a.index()] {
                    self.owns[p * m + b.index()] = false;
                }
            }
            self.room_counts[a.index()] -= 1;
            self.room_counts[b.index()] += 1;
        }
        if self.room_counts[b.index()] == 1 {
            self.owns[q * m + b.index()] = true;
        }
        for c in 0..m {
            if self.room_counts[c] == 0 {
                for p in 0..self.n {
                    self.owns[p * m + c] = true;
                }
            }
        }
        self.events += 1;
        Ok(())
    }

    pub fn replay(n: usize, m: usize, start: &[Config], history: &[ObservedEvent]) -> Result<OwnershipTable> {
        let mut t = OwnershipTable::new(n, m, start)?;
        for (i, e) in history.iter().enumerate() {
            t.apply_event(*e).map_err(|err| match err {
                Error::HistoryCorruption { reason, .. } => Error::HistoryCorruption { index: i, reason },
                other => other,
            })?;
        }
        Ok(t)
    }

    pub fn owns_matrix(&self) -> Vec<Vec<bool>> {
        self.owns.chunks(self.m).map(<[bool]>::to_vec).collect()
    }
}

/// Ownership carried inside explored states: the table plus, per prisoner,
/// whether it has ever provably owned every configuration at once.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OwnState {
    pub owns: Vec<bool>,
    pub ever_all: Vec<bool>,
}

fn counts(m: usize, rooms: &[Config]) -> Vec<u32> {
    let mut c = vec![0; m];
    rooms.iter().for_each(|r| c[r.index()] += 1);
    c
}

impl OwnState {
    pub fn initial(instance: &ProtocolInstance, world: &WorldState) -> OwnState {
        let (n, m) = (instance.n, instance.m);
        let c = counts(m, &world.rooms);
        let owns: Vec<bool> = (0..n * m).map(|i| c[i % m] == 0).collect();
        let ever_all = owns.chunks(m).map(|row| row.iter().all(|&o| o)).collect();
        OwnState { owns, ever_all }
    }

    /// State after the visit that took `from` to the world described by `record`.
    pub fn after(&self, instance: &ProtocolInstance, from: &WorldState, record: &StepRecord) -> OwnState {
        let (n, m) = (instance.n, instance.m);
        let mut t = OwnershipTable::from_parts(n, m, counts(m, &from.rooms), self.owns.clone());
        let ev = ObservedEvent { prisoner: record.prisoner, config_in: record.config_before, config_out: record.config_after };
        t.apply_event(ev).expect("world transitions are consistent histories");
        let ever_all = (0..n).map(|p| self.ever_all[p] || t.owns_all(p)).collect();
        OwnState { owns: t.owns, ever_all }
    }

    pub fn owns_all(&self, m: usize, prisoner: usize) -> bool {
        self.owns[prisoner * m..(prisoner + 1) * m].iter().all(|&o| o)
    }
}

pub const BRUTE_FORCE_MAX_ROOMS: usize = 5;
pub const BRUTE_FORCE_MAX_EVENTS: usize = 12;

/// Ownership facts that hold in every room assignment consistent with the
/// history, by exhaustive enumeration.
pub fn provable_ownership_bruteforce(
    start: &[Config],
    history: &[ObservedEvent],
    n: usize,
    m: usize,
) -> Result<Vec<Vec<bool>>> {
    let r = start.len();
    if r > BRUTE_FORCE_MAX_ROOMS || history.len() > BRUTE_FORCE_MAX_EVENTS || n > 8 {
        return Err(Error::ResourceLimit(format!(
            "brute force supports r <= {BRUTE_FORCE_MAX_ROOMS}, <= {BRUTE_FORCE_MAX_EVENTS} events, n <= 8"
        )));
    }
    // (room configs, per-prisoner visited-room bitmask)
    type Assign = (Vec<u8>, Vec<u8>);
    let mut layer: HashSet<Assign> = HashSet::new();
    layer.insert((start.iter().map(|c| c.0).collect(), vec![0u8; n]));
    for (i, e) in history.iter().enumerate() {
        let mut next = HashSet::new();
        for (rooms, visited) in &layer {
            for room in 0..r {
                if rooms[room] != e.config_in.0 {
                    continue;
                }
                let mut rooms = rooms.clone();
                let mut visited = visited.clone();
                rooms[room] = e.config_out.0;
                visited[e.prisoner] |= 1 << room;
                next.insert((rooms, visited));
            }
        }
        if next.is_empty() {
            return Err(Error::HistoryCorruption { index: i, reason: "no consistent room assignment".into() });
        }
        layer = next;
    }
    let mut result = vec![vec![true; m]; n];
    for (rooms, visited) in &layer {
        for (p, row) in result.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                let all = (0..r).filter(|&i| rooms[i] as usize == c).all(|i| visited[p] & (1 << i) != 0);
                *cell &= all;
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(p: usize, a: u8, b: u8) -> ObservedEvent {
        ObservedEvent { prisoner: p, config_in: Config(a), config_out: Config(b) }
    }

    #[test]
    fn first_flip_grants_ownership_of_new_singleton() {
        let start = vec![Config(0); 5];
        let h = [ev(0, 0, 1)];
        let t = OwnershipTable::replay(2, 2, &start, &h).unwrap();
        assert!(t.owns(0, Config(1)));
        assert!(!t.owns(0, Config(0)) && !t.owns(1, Config(0)));
        assert!(!t.owns(1, Config(1)));
        assert_eq!(t.owns_matrix(), provable_ownership_bruteforce(&start, &h, 2, 2).unwrap());
    }

    #[test]
    fn second_flip_from_unowned_config_revokes() {
        let start = vec![Config(0); 5];
        let h = [ev(0, 0, 1), ev(1, 0, 1)];
        let t = OwnershipTable::replay(2, 2, &start, &h).unwrap();
        assert!(!t.owns(0, Config(1)));
        assert!(!t.owns(1, Config(1)));
        assert_eq!(t.owns_matrix(), provable_ownership_bruteforce(&start, &h, 2, 2).unwrap());
    }

    #[test]
    fn empty_configs_are_owned_by_everyone() {
        let t = OwnershipTable::new(3, 4, &[Config(0), Config(2)]).unwrap();
        for p in 0..3 {
            assert!(t.owns(p, Config(1)) && t.owns(p, Config(3)));
            assert!(!t.owns(p, Config(0)) && !t.owns(p, Config(2)));
        }
        let oracle = provable_ownership_bruteforce(&[Config(0), Config(2)], &[], 3, 4).unwrap();
        assert_eq!(t.owns_matrix(), oracle);
    }

    #[test]
    fn inconsistent_event_is_corruption() {
        let mut t = OwnershipTable::new(2, 2, &[Config(0); 3]).unwrap();
        let err = t.apply_event(ev(0, 1, 0)).unwrap_err();
        assert!(matches!(err, Error::HistoryCorruption { index: 0, .. }));
        assert!(provable_ownership_bruteforce(&[Config(0); 3], &[ev(0, 1, 0)], 2, 2).is_err());
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let r = provable_ownership_bruteforce(&[Config(0); 6], &[], 2, 2);
        assert!(matches!(r, Err(Error::ResourceLimit(_))));
    }
}
