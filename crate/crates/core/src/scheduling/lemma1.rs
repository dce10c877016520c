//! The indistinguishable schedule pair used against protocols that assume a
//! known start configuration.
//!
//! `s1` sends every prisoner through room 0 in a fixed order. `s2` starts
//! every other room in a configuration `D` that recurs at pass boundaries
//! under `s1`, and moves on to a fresh room whenever the current one is
//! back in `D` at a pass boundary. No prisoner can tell the two apart.

use std::collections::HashMap;

use crate::library::ProtocolInstance;
use crate::protocol::{Config, PrisonerState};
use crate::verifier::{run, Outcome};
use crate::world::{StepRecord, VisitEvent, WinCondition, WorldState};

use super::{round_robin, RoundRobin, Scheduler};

/// Simulate ordered passes of all prisoners through a single room starting
/// in `c` until the joint state (room config, cursors) repeats at a pass
/// boundary. Returns the room config at the repeat and the cycle length in
/// passes.
pub fn find_recurring_config(instance: &ProtocolInstance, c: Config) -> (Config, usize) {
    let mut room = c;
    let mut cursors = vec![PrisonerState::default(); instance.n];
    let mut seen: HashMap<(Config, Vec<PrisonerState>), usize> = HashMap::new();
    for pass in 0.. {
        if let Some(&first) = seen.get(&(room, cursors.clone())) {
            return (room, pass - first);
        }
        seen.insert((room, cursors.clone()), pass);
        for (p, cursor) in cursors.iter_mut().enumerate() {
            let (next, out) = instance.visit(p, *cursor, room);
            *cursor = next;
            room = out.new_config;
        }
    }
    unreachable!("finite joint state space")
}

/// Everyone through room 0, prisoners in index order.
#[derive(Clone, Debug)]
pub struct SingleRoom {
    n: usize,
    t: usize,
}

impl Scheduler for SingleRoom {
    fn next(&mut self, _world: &WorldState) -> VisitEvent {
        let e = VisitEvent { prisoner: self.t % self.n, room: 0 };
        self.t += 1;
        e
    }

    fn name(&self) -> String {
        "lemma1-s1".into()
    }
}

/// Same prisoner order as [`SingleRoom`], but through a current room that
/// advances whenever it is in `d` at a pass boundary.
#[derive(Clone, Debug)]
pub struct Rotating {
    n: usize,
    r: usize,
    d: Config,
    t: usize,
    current: usize,
    pub advances: usize,
}

impl Scheduler for Rotating {
    fn next(&mut self, world: &WorldState) -> VisitEvent {
        if self.t > 0 && self.t % self.n == 0 && world.rooms[self.current] == self.d {
            self.current = (self.current + 1) % self.r;
            self.advances += 1;
        }
        let e = VisitEvent { prisoner: self.t % self.n, room: self.current };
        self.t += 1;
        e
    }

    fn name(&self) -> String {
        "lemma1-s2".into()
    }
}

#[derive(Clone, Debug)]
pub struct SchedulePair {
    pub c: Config,
    pub d: Config,
    /// Passes between recurrences of the joint single-room state.
    pub cycle_length: usize,
    pub start: Vec<Config>,
    n: usize,
    r: usize,
}

impl SchedulePair {
    pub fn s1(&self) -> SingleRoom {
        SingleRoom { n: self.n, t: 0 }
    }

    pub fn s2(&self) -> Rotating {
        Rotating { n: self.n, r: self.r, d: self.d, t: 0, current: 0, advances: 0 }
    }

    /// The instance with its start replaced by `(C, D, D, ...)`.
    pub fn instance(&self, base: &ProtocolInstance) -> ProtocolInstance {
        ProtocolInstance { start: self.start.clone(), ..base.clone() }
    }
}

/// `C` is the instance's own start config for room 0.
pub fn build_schedule_pair(instance: &ProtocolInstance) -> SchedulePair {
    let c = instance.start[0];
    let (d, cycle_length) = find_recurring_config(instance, c);
    let mut start = vec![d; instance.r];
    start[0] = c;
    SchedulePair { c, d, cycle_length, start, n: instance.n, r: instance.r }
}

/// Replays `inner` for `declare_step` events, then round-robin.
pub struct ExtendToValid {
    inner: Box<dyn Scheduler>,
    declare_step: u64,
    t: u64,
    tail: RoundRobin,
}

pub fn extend_to_valid(inner: Box<dyn Scheduler>, declare_step: u64, n: usize, r: usize) -> ExtendToValid {
    ExtendToValid { inner, declare_step, t: 0, tail: round_robin(n, r) }
}

impl Scheduler for ExtendToValid {
    fn next(&mut self, world: &WorldState) -> VisitEvent {
        self.t += 1;
        if self.t <= self.declare_step {
            self.inner.next(world)
        } else {
            self.tail.next(world)
        }
    }

    fn observe(&mut self, record: &StepRecord, world: &WorldState) {
        if record.step <= self.declare_step {
            self.inner.observe(record, world);
        }
    }

    fn name(&self) -> String {
        format!("{}+round-robin@{}", self.inner.name(), self.declare_step)
    }
}

/// Per-prisoner (seen, left) sequence.
pub type ObservationLog = Vec<Vec<(Config, Config)>>;

fn observe_run(instance: &ProtocolInstance, scheduler: &mut dyn Scheduler, events: usize) -> (ObservationLog, Vec<VisitEvent>) {
    let mut world = WorldState::initial(instance, 1);
    let mut logs = vec![Vec::new(); instance.n];
    let mut schedule = Vec::with_capacity(events);
    for step in 1..=events as u64 {
        let e = scheduler.next(&world);
        let (rec, _) = world.apply(instance, e, WinCondition::default(), step);
        scheduler.observe(&rec, &world);
        logs[e.prisoner].push((rec.config_before, rec.config_after));
        schedule.push(e);
    }
    (logs, schedule)
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub events: usize,
    pub identical: bool,
    /// First prisoner whose logs differ, and the index into its log.
    pub first_divergence: Option<(usize, usize)>,
    pub pointer_advances: usize,
    pub rooms_visited_by_s2: usize,
}

/// Run both schedules for `events` visits, ignoring declarations, and
/// compare what each prisoner observed.
pub fn compare_observations(base: &ProtocolInstance, pair: &SchedulePair, events: usize) -> Comparison {
    let inst = pair.instance(base);
    let (a, _) = observe_run(&inst, &mut pair.s1(), events);
    let mut s2 = pair.s2();
    let (b, sched) = observe_run(&inst, &mut s2, events);
    let mut first_divergence = None;
    for p in 0..inst.n {
        if let Some(i) = a[p].iter().zip(&b[p]).position(|(x, y)| x != y) {
            first_divergence = Some((p, i));
            break;
        }
    }
    let mut rooms: Vec<usize> = sched.iter().map(|e| e.room).collect();
    rooms.sort_unstable();
    rooms.dedup();
    Comparison {
        events,
        identical: first_divergence.is_none(),
        first_divergence,
        pointer_advances: s2.advances,
        rooms_visited_by_s2: rooms.len(),
    }
}

#[derive(Clone, Debug)]
pub struct Dichotomy {
    pub s1: Outcome,
    /// Present when `s1` declared.
    pub extended: Option<Outcome>,
    /// Present when `s1` did not declare.
    pub s2: Option<Outcome>,
}

impl Dichotomy {
    /// An incorrect declaration under the valid extension of `s1`, or no
    /// declaration under `s2`.
    pub fn manifested(&self) -> bool {
        matches!(self.extended, Some(Outcome::DeclaredIncorrect { .. }))
            || matches!(self.s2, Some(Outcome::StepLimit { .. }))
    }
}

pub fn dichotomy(base: &ProtocolInstance, pair: &SchedulePair, max_steps: u64) -> Dichotomy {
    let inst = pair.instance(base);
    let win = base.win;
    let s1 = run(&inst, &mut pair.s1(), win, max_steps).outcome;
    match s1 {
        Outcome::StepLimit { .. } => {
            let s2 = run(&inst, &mut pair.s2(), win, max_steps).outcome;
            Dichotomy { s1, extended: None, s2: Some(s2) }
        }
        _ => {
            let mut ext = extend_to_valid(Box::new(pair.s1()), s1.step(), inst.n, inst.r);
            let extended = run(&inst, &mut ext, win, max_steps).outcome;
            Dichotomy { s1, extended: Some(extended), s2: None }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{one_room_known, two_switch_prisoner};
    use crate::protocol::Program;

    fn inert(n: usize, r: usize) -> ProtocolInstance {
        let mut inst = two_switch_prisoner(n, r).unwrap();
        inst.programs = (0..n).map(|p| Program::new(format!("p{p}"), vec![]).unwrap()).collect();
        inst
    }

    #[test]
    fn inert_programs_recur_immediately() {
        let inst = inert(2, 3);
        assert_eq!(find_recurring_config(&inst, Config(1)), (Config(1), 1));
        let pair = build_schedule_pair(&inst);
        assert_eq!(pair.c, pair.d);
        let cmp = compare_observations(&inst, &pair, 60);
        assert!(cmp.identical);
        assert_eq!(cmp.rooms_visited_by_s2, 3);
        assert_eq!(cmp.pointer_advances, 29);
    }

    #[test]
    fn one_room_recurs_in_off_after_declaration() {
        let inst = one_room_known(2).unwrap();
        let (d, _) = find_recurring_config(&inst, Config(0));
        assert_eq!(d, Config(0));
    }

    #[test]
    fn extension_with_zero_prefix_is_round_robin() {
        let inst = inert(2, 2);
        let mut s = extend_to_valid(Box::new(build_schedule_pair(&inst).s1()), 0, 2, 2);
        let w = WorldState::initial(&inst, 1);
        let got: Vec<_> = (0..4).map(|_| s.next(&w)).collect();
        let want: Vec<_> = (0..4).map(|t| RoundRobin::event_at(2, 2, t)).collect();
        assert_eq!(got, want);
    }
}
