//! Visit schedules: fair generators for liveness runs and the adversarial
//! constructions used for the impossibility results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::world::{StepRecord, VisitEvent, WorldState};

pub mod lemma1;
pub mod s1;

pub use lemma1::{build_schedule_pair, compare_observations, dichotomy, extend_to_valid, find_recurring_config, Comparison, Dichotomy, SchedulePair};
pub use s1::{run_s1, s1_adversary, S1Adversary, S1Report, Witness};

/// A warden: sees the full world and picks the next visit.
pub trait Scheduler {
    fn next(&mut self, world: &WorldState) -> VisitEvent;

    /// Called with the record of every executed visit.
    fn observe(&mut self, _record: &StepRecord, _world: &WorldState) {}

    fn name(&self) -> String;
}

/// Cycles through the `n * r` pairs; pair `t mod nr` is `(t / r, t % r)`.
#[derive(Clone, Debug)]
pub struct RoundRobin {
    n: usize,
    r: usize,
    t: usize,
}

pub fn round_robin(n: usize, r: usize) -> RoundRobin {
    RoundRobin { n, r, t: 0 }
}

impl RoundRobin {
    pub fn event_at(n: usize, r: usize, t: usize) -> VisitEvent {
        let idx = t % (n * r);
        VisitEvent { prisoner: idx / r, room: idx % r }
    }
}

impl Scheduler for RoundRobin {
    fn next(&mut self, _world: &WorldState) -> VisitEvent {
        let e = RoundRobin::event_at(self.n, self.r, self.t);
        self.t += 1;
        e
    }

    fn name(&self) -> String {
        "round-robin".into()
    }
}

/// Uniform i.i.d. pairs from a ChaCha8 stream seeded with a `u64`.
#[derive(Clone, Debug)]
pub struct SeededRandom {
    n: usize,
    r: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

pub fn seeded_random(n: usize, r: usize, seed: u64) -> SeededRandom {
    SeededRandom { n, r, seed, rng: ChaCha8Rng::seed_from_u64(seed) }
}

impl SeededRandom {
    pub fn draw(&mut self) -> VisitEvent {
        let idx = self.rng.gen_range(0..self.n * self.r);
        VisitEvent { prisoner: idx / self.r, room: idx % self.r }
    }
}

impl Scheduler for SeededRandom {
    fn next(&mut self, _world: &WorldState) -> VisitEvent {
        self.draw()
    }

    fn name(&self) -> String {
        format!("random(seed={})", self.seed)
    }
}

/// Plays a fixed prefix, then continues round-robin.
#[derive(Clone, Debug)]
pub struct Replay {
    events: Vec<VisitEvent>,
    pos: usize,
    tail: RoundRobin,
    label: String,
}

pub fn replay(events: Vec<VisitEvent>, n: usize, r: usize, label: &str) -> Replay {
    Replay { events, pos: 0, tail: round_robin(n, r), label: label.into() }
}

impl Scheduler for Replay {
    fn next(&mut self, world: &WorldState) -> VisitEvent {
        if let Some(e) = self.events.get(self.pos) {
            self.pos += 1;
            *e
        } else {
            self.tail.next(world)
        }
    }

    fn name(&self) -> String {
        self.label.clone()
    }
}

fn tours(prisoner: usize, r: usize, times: usize, out: &mut Vec<VisitEvent>) {
    for _ in 0..times {
        out.extend((0..r).map(|room| VisitEvent { prisoner, room }));
    }
}

/// A visit sequence that drives the two-configuration epsilon protocol
/// to a correct declaration: each prisoner in turn tours all rooms four
/// times, handing over through alternating visits to room 0.
pub fn prob_eps_witness(n: usize, r: usize) -> Vec<VisitEvent> {
    let mut out = Vec::new();
    tours(0, r, 4, &mut out);
    for k in 0..n.saturating_sub(1) {
        for _ in 0..=k {
            out.push(VisitEvent { prisoner: k + 1, room: 0 });
            out.push(VisitEvent { prisoner: k, room: 0 });
        }
        tours(k + 1, r, 4, &mut out);
    }
    out
}

pub const SCHEDULER_IDS: &[&str] = &["round-robin", "random", "lemma1-pair", "s1-adversary", "witness"];

/// Every window of `window` consecutive events contains every pair.
pub fn window_fair(events: &[VisitEvent], n: usize, r: usize, window: usize) -> bool {
    if events.len() < window {
        return true;
    }
    let mut counts = vec![0usize; n * r];
    let mut missing = n * r;
    for (i, e) in events.iter().enumerate() {
        let k = e.prisoner * r + e.room;
        if counts[k] == 0 {
            missing -= 1;
        }
        counts[k] += 1;
        if i >= window {
            let old = events[i - window];
            let k = old.prisoner * r + old.room;
            counts[k] -= 1;
            if counts[k] == 0 {
                missing += 1;
            }
        }
        if i + 1 >= window && missing != 0 {
            return false;
        }
    }
    true
}

/// Resolve a simple scheduler id. Adversarial schedulers need an instance
/// and are built through their own constructors.
pub fn simple_scheduler(id: &str, n: usize, r: usize, seed: u64) -> Result<Box<dyn Scheduler>> {
    match id {
        "round-robin" => Ok(Box::new(round_robin(n, r))),
        "random" => Ok(Box::new(seeded_random(n, r, seed))),
        "witness" => Ok(Box::new(replay(prob_eps_witness(n, r), n, r, "witness"))),
        other => Err(Error::Unknown(format!("scheduler {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::two_switch_prisoner;

    fn take(s: &mut dyn Scheduler, k: usize, world: &WorldState) -> Vec<VisitEvent> {
        (0..k).map(|_| s.next(world)).collect()
    }

    #[test]
    fn round_robin_has_period_nr() {
        let inst = two_switch_prisoner(2, 2).unwrap();
        let w = WorldState::initial(&inst, 1);
        let ev = take(&mut round_robin(2, 2), 8, &w);
        assert_eq!(ev[..4], ev[4..]);
        let pairs: Vec<(usize, usize)> = ev[..4].iter().map(|e| (e.prisoner, e.room)).collect();
        assert_eq!(pairs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert!(window_fair(&take(&mut round_robin(3, 2), 1000, &w), 3, 2, 6));
    }

    #[test]
    fn seeded_random_is_reproducible() {
        let inst = two_switch_prisoner(2, 2).unwrap();
        let w = WorldState::initial(&inst, 1);
        let a = take(&mut seeded_random(2, 2, 7), 200, &w);
        let b = take(&mut seeded_random(2, 2, 7), 200, &w);
        let c = take(&mut seeded_random(2, 2, 8), 200, &w);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn witness_length() {
        // 4r for p0, then (k + 1) pairs and 4r per later prisoner.
        let w = prob_eps_witness(3, 2);
        assert_eq!(w.len(), 8 + (2 + 8) + (4 + 8));
    }

    #[test]
    fn window_fairness_detects_gaps() {
        let ev = vec![VisitEvent { prisoner: 0, room: 0 }; 10];
        assert!(!window_fair(&ev, 1, 2, 2));
    }
}
