//! The warden strategy defeating every single-switch protocol for `r >= 5`.
//!
//! The warden keeps the provable-ownership table of the observed history.
//! Whenever some prisoner is finished, one configuration holds at most one
//! room, or nobody provably owns anything, it extends the sequence directly
//! (least recently occurred pair). Otherwise exactly one prisoner `p` owns a
//! two-room configuration, and the warden walks another prisoner through a
//! sequence of configurations that forces it to act.

use crate::error::{Error, Result};
use crate::library::ProtocolInstance;
use crate::ownership::{ObservedEvent, OwnershipTable};
use crate::protocol::{forcing_word, ActivityOracle, Config};
use crate::verifier::{run, Outcome};
use crate::world::{StepRecord, VisitEvent, WorldState};

use super::{replay, Scheduler};

/// Which of the four invariant conditions hold for a table.
pub fn conditions(table: &OwnershipTable, finished: &[bool]) -> [bool; 4] {
    let counts = &table.room_counts;
    let nobody_owns = |c: usize| (0..table.n).all(|p| !table.owns[p * table.m + c]);
    let c1 = (0..2).any(|x| counts[x] <= 1 && nobody_owns(1 - x));
    let c2 = counts[0] >= 2 && counts[1] >= 2 && table.owns.iter().all(|&o| !o);
    let c3 = (0..2).any(|c| {
        let owners: Vec<usize> = (0..table.n).filter(|&p| table.owns[p * table.m + c]).collect();
        counts[c] == 2 && owners.len() == 1 && table.owns.iter().filter(|&&o| o).count() == 1
    });
    let c4 = finished.iter().any(|&f| f);
    [c1, c2, c3, c4]
}

pub struct S1Adversary {
    inst: ProtocolInstance,
    table: OwnershipTable,
    oracles: Vec<ActivityOracle>,
    finished: Vec<bool>,
    /// Step of the last occurrence of each pair; 0 = never.
    last: Vec<u64>,
    occurrences: Vec<u64>,
    plan: Vec<Config>,
    plan_prisoner: usize,
    step: u64,
    pub direct_count: u64,
    pub case4_count: u64,
    pub invariant_ok: bool,
    pub first_violation: Option<u64>,
    /// Observed history, in order.
    pub history: Vec<ObservedEvent>,
    pub schedule: Vec<VisitEvent>,
    /// Step at which each prisoner became finished.
    pub finished_at: Vec<Option<u64>>,
}

pub fn s1_adversary(instance: &ProtocolInstance) -> Result<S1Adversary> {
    let (n, r, m) = (instance.n, instance.r, instance.m);
    if m != 2 || n < 2 || r < 5 || instance.forced_flip {
        return Err(Error::Unsupported(format!(
            "s1 adversary needs m = 2, n >= 2, r >= 5 (got m = {m}, n = {n}, r = {r})"
        )));
    }
    let table = OwnershipTable::new(n, m, &instance.start)?;
    let mut adv = S1Adversary {
        inst: instance.clone(),
        table,
        oracles: (0..n).map(|_| ActivityOracle::new(m)).collect(),
        finished: vec![false; n],
        last: vec![0; n * r],
        occurrences: vec![0; n * r],
        plan: Vec::new(),
        plan_prisoner: 0,
        step: 0,
        direct_count: 0,
        case4_count: 0,
        invariant_ok: true,
        first_violation: None,
        history: Vec::new(),
        schedule: Vec::new(),
        finished_at: vec![None; n],
    };
    let world = WorldState::initial(instance, 1);
    adv.refresh_finished(&world);
    adv.check_invariant();
    Ok(adv)
}

impl S1Adversary {
    fn refresh_finished(&mut self, world: &WorldState) {
        for p in 0..self.inst.n {
            if !self.finished[p] && !self.oracles[p].can_act(self.inst.program(p), world.prisoners[p]) {
                self.finished[p] = true;
                self.finished_at[p] = Some(self.step);
            }
        }
    }

    fn check_invariant(&mut self) {
        if !conditions(&self.table, &self.finished).iter().any(|&c| c) && self.invariant_ok {
            self.invariant_ok = false;
            self.first_violation = Some(self.step);
        }
    }

    fn direct(&self) -> VisitEvent {
        let r = self.inst.r;
        let idx = (0..self.last.len()).min_by_key(|&i| (self.last[i], i)).expect("n * r > 0");
        VisitEvent { prisoner: idx / r, room: idx % r }
    }

    fn extend_directly(&self) -> bool {
        let counts = &self.table.room_counts;
        self.finished.iter().any(|&f| f) || counts.iter().any(|&c| c <= 1) || self.table.owns.iter().all(|&o| !o)
    }

    /// Plan a forcing walk for the lowest-indexed prisoner other than the
    /// unique owner.
    fn plan_case4(&mut self, world: &WorldState) -> bool {
        let owner = (0..self.inst.n).find(|&p| self.table.owns[p * 2..p * 2 + 2].iter().any(|&o| o));
        let Some(owner) = owner else { return false };
        let other = (0..self.inst.n).find(|&p| p != owner).expect("n >= 2");
        let present: Vec<Config> = (0..2u8).map(Config).filter(|c| self.table.room_counts[c.index()] > 0).collect();
        match forcing_word(self.inst.program(other), world.prisoners[other], &present) {
            Some(word) => {
                self.plan = word.into_iter().rev().collect();
                self.plan_prisoner = other;
                true
            }
            None => false,
        }
    }

    fn routed(&self, world: &WorldState, c: Config) -> Option<VisitEvent> {
        let (p, r) = (self.plan_prisoner, self.inst.r);
        (0..r)
            .filter(|&room| world.rooms[room] == c)
            .min_by_key(|&room| (self.last[p * r + room], room))
            .map(|room| VisitEvent { prisoner: p, room })
    }

    /// Each pair occurred at least `floor(direct / (n r))` times.
    pub fn fairness_ok(&self) -> bool {
        let k = self.direct_count / self.last.len() as u64;
        self.occurrences.iter().all(|&o| o >= k)
    }
}

impl Scheduler for S1Adversary {
    fn next(&mut self, world: &WorldState) -> VisitEvent {
        if self.plan.is_empty() && !self.extend_directly() {
            self.plan_case4(world);
        }
        while let Some(&c) = self.plan.last() {
            self.plan.pop();
            if let Some(e) = self.routed(world, c) {
                self.case4_count += 1;
                return e;
            }
            self.plan.clear();
        }
        self.direct_count += 1;
        self.direct()
    }

    fn observe(&mut self, record: &StepRecord, world: &WorldState) {
        let r = self.inst.r;
        self.step = record.step;
        let idx = record.prisoner * r + record.room;
        self.last[idx] = record.step;
        self.occurrences[idx] += 1;
        let ev = ObservedEvent { prisoner: record.prisoner, config_in: record.config_before, config_out: record.config_after };
        self.history.push(ev);
        self.schedule.push(VisitEvent { prisoner: record.prisoner, room: record.room });
        if self.table.apply_event(ev).is_err() {
            self.invariant_ok = false;
            self.first_violation.get_or_insert(record.step);
        }
        self.refresh_finished(world);
        self.check_invariant();
    }

    fn name(&self) -> String {
        "s1-adversary".into()
    }
}

/// A concrete schedule, consistent with what the prisoners observed, under
/// which the same declaration is made while `prisoner` never entered `room`.
#[derive(Clone, Debug)]
pub struct Witness {
    /// Set when the post-finish visits of this prisoner were dropped.
    pub dropped_after_finish: Option<usize>,
    pub prisoner: usize,
    pub room: usize,
    pub schedule: Vec<VisitEvent>,
    pub replay: Outcome,
}

#[derive(Clone, Debug)]
pub struct S1Report {
    pub outcome: Outcome,
    pub events: usize,
    pub invariant_ok: bool,
    pub first_violation: Option<u64>,
    pub fairness_ok: bool,
    pub direct_count: u64,
    pub case4_count: u64,
    pub witness: Option<Witness>,
    /// A declaration was made and no consistent schedule refutes it.
    pub protocol_won: bool,
}

/// Assign history events to rooms so that `prisoner` never enters `room`.
fn avoid_room(
    start: &[Config],
    history: &[(VisitEvent, ObservedEvent)],
    prisoner: usize,
    room: usize,
) -> Option<Vec<VisitEvent>> {
    let m = 2;
    let mut counts = vec![0i64; m];
    for c in start {
        counts[c.index()] += 1;
    }
    // reach[i][c]: back pointer for T in config c after i events.
    let mut reach: Vec<Vec<Option<(usize, bool)>>> = vec![vec![None; m]; history.len() + 1];
    reach[0][start[room].index()] = Some((usize::MAX, false));
    for (i, (_, e)) in history.iter().enumerate() {
        let (a, b) = (e.config_in.index(), e.config_out.index());
        for t in 0..m {
            if reach[i][t].is_none() {
                continue;
            }
            if t == a && e.prisoner != prisoner && reach[i + 1][b].is_none() {
                reach[i + 1][b] = Some((t, true));
            }
            if counts[a] - i64::from(t == a) >= 1 && reach[i + 1][t].is_none() {
                reach[i + 1][t] = Some((t, false));
            }
        }
        counts[a] -= 1;
        counts[b] += 1;
    }
    let mut t = (0..m).find(|&t| reach[history.len()][t].is_some())?;
    let mut on_t = vec![false; history.len()];
    for i in (0..history.len()).rev() {
        let (prev, used) = reach[i + 1][t].expect("reachable");
        on_t[i] = used;
        t = prev;
    }
    let mut rooms = start.to_vec();
    let mut schedule = Vec::with_capacity(history.len());
    for (i, (ev, e)) in history.iter().enumerate() {
        let target = if on_t[i] {
            room
        } else {
            (0..rooms.len()).find(|&x| x != room && rooms[x] == e.config_in)?
        };
        rooms[target] = e.config_out;
        schedule.push(VisitEvent { prisoner: ev.prisoner, room: target });
    }
    Some(schedule)
}

fn find_witness(inst: &ProtocolInstance, adv: &S1Adversary) -> Option<Witness> {
    let full: Vec<(VisitEvent, ObservedEvent)> = adv.schedule.iter().copied().zip(adv.history.iter().copied()).collect();
    let mut candidates: Vec<(Option<usize>, Vec<(VisitEvent, ObservedEvent)>)> = vec![(None, full.clone())];
    for (p, at) in adv.finished_at.iter().enumerate() {
        if let Some(at) = *at {
            let reduced = full
                .iter()
                .enumerate()
                .filter(|(i, (ev, _))| ev.prisoner != p || (*i as u64) < at)
                .map(|(_, x)| *x)
                .collect();
            candidates.push((Some(p), reduced));
        }
    }
    for (dropped, history) in candidates {
        for prisoner in 0..inst.n {
            for room in 0..inst.r {
                let Some(schedule) = avoid_room(&inst.start, &history, prisoner, room) else { continue };
                let steps = schedule.len() as u64;
                let mut s = replay(schedule.clone(), inst.n, inst.r, "witness");
                let replay = run(inst, &mut s, inst.win, steps.max(1)).outcome;
                if matches!(replay, Outcome::DeclaredIncorrect { .. }) {
                    return Some(Witness { dropped_after_finish: dropped, prisoner, room, schedule, replay });
                }
            }
        }
    }
    None
}

/// Run the adversary for up to `events` visits and judge any declaration.
pub fn run_s1(instance: &ProtocolInstance, events: u64) -> Result<S1Report> {
    let mut adv = s1_adversary(instance)?;
    let res = run(instance, &mut adv, instance.win, events);
    let outcome = res.outcome;
    let witness = match outcome {
        Outcome::DeclaredCorrect { .. } => find_witness(instance, &adv),
        _ => None,
    };
    let protocol_won = outcome.is_correct() && witness.is_none();
    Ok(S1Report {
        outcome,
        events: res.trace.len(),
        invariant_ok: adv.invariant_ok,
        first_violation: adv.first_violation,
        fairness_ok: adv.fairness_ok(),
        direct_count: adv.direct_count,
        case4_count: adv.case4_count,
        witness,
        protocol_won,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{one_room_known_per_room, two_switch_prisoner};
    use crate::protocol::Program;

    #[test]
    fn rejects_wrong_parameters() {
        let inst = two_switch_prisoner(2, 5).unwrap();
        assert!(matches!(s1_adversary(&inst), Err(Error::Unsupported(_))));
        let inst = one_room_known_per_room(2, 4).unwrap();
        assert!(matches!(s1_adversary(&inst), Err(Error::Unsupported(_))));
    }

    #[test]
    fn inert_programs_get_fair_direct_schedule() {
        let mut inst = one_room_known_per_room(2, 5).unwrap();
        inst.programs = (0..2).map(|p| Program::new(format!("p{p}"), vec![]).unwrap()).collect();
        let rep = run_s1(&inst, 1000).unwrap();
        assert_eq!(rep.outcome, Outcome::StepLimit { step: 1000 });
        assert!(rep.invariant_ok && rep.fairness_ok);
        assert_eq!(rep.direct_count, 1000);
        assert_eq!(rep.case4_count, 0);
    }

    #[test]
    fn avoid_room_keeps_observations() {
        let start = vec![Config(0); 5];
        let h = [(0, 0, 1), (1, 1, 1), (1, 0, 0)];
        let history: Vec<_> = h
            .iter()
            .map(|&(p, a, b)| {
                (VisitEvent { prisoner: p, room: 0 }, ObservedEvent { prisoner: p, config_in: Config(a), config_out: Config(b) })
            })
            .collect();
        let s = avoid_room(&start, &history, 1, 0).unwrap();
        assert!(s.iter().all(|e| !(e.prisoner == 1 && e.room == 0)));
        // p1 saw the only ON room, so p0's flip cannot have been in room 0
        assert_eq!(s[1].room, s[0].room);
        assert_ne!(s[0].room, 0);
    }
}
