//! Invariant monitors evaluated on every explored state and edge.

use crate::error::{Error, Result};
use crate::library::{room_phase, two_switch, Family, ProtocolInstance};
use crate::ownership::OwnState;
use crate::protocol::{ActivityOracle, Config, Op, Program};
use crate::world::{StepRecord, WorldState};

pub trait Monitor {
    fn id(&self) -> &str;

    /// A violation message, if the state breaks the invariant.
    fn check_state(&mut self, _inst: &ProtocolInstance, _world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        None
    }

    fn check_edge(
        &mut self,
        _inst: &ProtocolInstance,
        _from: &WorldState,
        _record: &StepRecord,
        _to: &WorldState,
        _own_to: Option<&OwnState>,
    ) -> Option<String> {
        None
    }

    fn needs_ownership(&self) -> bool {
        false
    }
}

pub const MONITOR_IDS: &[&str] = &[
    "two-switch-disjunction",
    "two-switch-count",
    "room-phase",
    "six-done",
    "prob1-phases",
    "imbalance",
    "knowledge",
    "declare-own",
    "finish-own",
];

/// Region name per cursor position; the terminal position is `"end"`.
fn regions(program: &Program) -> Vec<String> {
    (0..program.cursor_positions() as u32).map(|pc| program.region_at(pc).unwrap_or("end").to_string()).collect()
}

/// Per cursor position, the number of earlier steps satisfying `pred`.
fn steps_before(program: &Program, pred: impl Fn(usize, &Op) -> bool) -> Vec<u32> {
    let mut out = vec![0];
    for (i, s) in program.steps().iter().enumerate() {
        out.push(out[i] + u32::from(pred(i, &s.op)));
    }
    out
}

fn region_of<'a>(table: &'a [Vec<String>], world: &WorldState, p: usize) -> &'a str {
    let t = &table[p];
    &t[(world.prisoners[p].pc as usize).min(t.len() - 1)]
}

fn op_at<'a>(inst: &'a ProtocolInstance, world: &WorldState, p: usize) -> Option<&'a Op> {
    inst.program(p).step_at(world.prisoners[p].pc).map(|s| &s.op)
}

fn is_flip(op: Option<&Op>, from: u8, to: u8) -> bool {
    matches!(op, Some(Op::Flip { from: a, to: b }) if a.0 == from && b.0 == to)
}

fn rooms(inst: &ProtocolInstance, world: &WorldState) -> Vec<u8> {
    world.rooms.iter().map(|&c| inst.decode(c).0).collect()
}

fn fmt_rooms(rooms: &[u8]) -> String {
    format!("{rooms:?}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Life {
    Waiting,
    Active,
    Exhausted,
}

/// Lifecycle of each prisoner in the two-switch protocol, by cursor.
fn lifecycle(inst: &ProtocolInstance) -> Vec<Vec<Life>> {
    inst.programs
        .iter()
        .enumerate()
        .map(|(p, prog)| {
            regions(prog)
                .iter()
                .map(|r| match (p, r.as_str()) {
                    (0, "count" | "declare" | "end") => Life::Exhausted,
                    (0, _) => Life::Active,
                    (_, "wait") => Life::Waiting,
                    (_, "end") => Life::Exhausted,
                    _ => Life::Active,
                })
                .collect()
        })
        .collect()
}

fn life_counts(table: &[Vec<Life>], world: &WorldState) -> (usize, usize) {
    let mut active = 0;
    let mut exhausted = 0;
    for (p, t) in table.iter().enumerate() {
        match t[(world.prisoners[p].pc as usize).min(t.len() - 1)] {
            Life::Active => active += 1,
            Life::Exhausted => exhausted += 1,
            Life::Waiting => {}
        }
    }
    (active, exhausted)
}

/// Either all rooms are 0/1 with exactly one active prisoner, or all rooms
/// are 0 but one in NEXT/READY with no active prisoner.
pub struct TwoSwitchDisjunction {
    life: Vec<Vec<Life>>,
}

impl Monitor for TwoSwitchDisjunction {
    fn id(&self) -> &str {
        "two-switch-disjunction"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        use two_switch::*;
        let rooms = rooms(inst, world);
        let (active, _) = life_counts(&self.life, world);
        let first = rooms.iter().all(|&c| c == ZERO || c == ONE) && active == 1;
        let signal = rooms.iter().filter(|&&c| c == NEXT || c == READY).count() == 1;
        let second = signal && rooms.iter().all(|&c| c != ONE) && active == 0;
        (!first && !second).then(|| format!("rooms {} with {active} active prisoners", fmt_rooms(&rooms)))
    }
}

/// Exhausted prisoners = completed NEXT->READY flips + [a NEXT room exists],
/// and all `n` are exhausted at the declaration.
pub struct TwoSwitchCount {
    life: Vec<Vec<Life>>,
    acks: Vec<u32>,
}

impl Monitor for TwoSwitchCount {
    fn id(&self) -> &str {
        "two-switch-count"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        let rooms = rooms(inst, world);
        let (_, exhausted) = life_counts(&self.life, world);
        let acks = self.acks[(world.prisoners[0].pc as usize).min(self.acks.len() - 1)] as usize;
        let next = usize::from(rooms.contains(&two_switch::NEXT));
        if exhausted != acks + next {
            return Some(format!("{exhausted} exhausted but {acks} acknowledged and {next} pending"));
        }
        if world.declared[0] && exhausted != inst.n {
            return Some(format!("leader declared with {exhausted} of {} exhausted", inst.n));
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Zero,
    One,
    Transition,
}

/// Phase statements for the two-switch room-at-a-time protocol.
pub struct RoomPhase {
    regions: Vec<Vec<String>>,
    done: Vec<u32>,
}

impl RoomPhase {
    fn phase(&self, world: &WorldState) -> Phase {
        match region_of(&self.regions, world, 0) {
            "zero-count" | "zero-done" => Phase::Zero,
            "one-count" | "one-done" => Phase::One,
            _ => Phase::Transition,
        }
    }
}

impl Monitor for RoomPhase {
    fn id(&self) -> &str {
        "room-phase"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        use room_phase::*;
        let rooms = rooms(inst, world);
        let done_rooms = rooms.iter().filter(|&&c| c == DONE).count() as u32;
        let done = self.done[(world.prisoners[0].pc as usize).min(self.done.len() - 1)];
        if done_rooms != done {
            return Some(format!("{done_rooms} DONE rooms after {done} completed phases"));
        }
        let (rest, active, wrong) = match self.phase(world) {
            Phase::Zero => (ZERO, ONE, "one-flip"),
            Phase::One => (ONE, ZERO, "zero-flip"),
            Phase::Transition => {
                if rooms.contains(&UP) {
                    return Some(format!("UP room during a transition: {}", fmt_rooms(&rooms)));
                }
                return None;
            }
        };
        let odd = rooms.iter().filter(|&&c| c != rest && c != DONE).count();
        let active_ok = rooms.iter().filter(|&&c| c == active || c == UP).count() == 1;
        if odd != 1 || !active_ok {
            return Some(format!("phase rooms {}", fmt_rooms(&rooms)));
        }
        if let Some(p) = (1..inst.n).find(|&p| region_of(&self.regions, world, p) == wrong) {
            return Some(format!("p{p} waits on its {wrong} line during the phase"));
        }
        None
    }

    fn check_edge(
        &mut self,
        inst: &ProtocolInstance,
        from: &WorldState,
        record: &StepRecord,
        to: &WorldState,
        _own_to: Option<&OwnState>,
    ) -> Option<String> {
        let changed = record.config_before != record.config_after;
        let from_phase = self.phase(from);
        if from_phase == Phase::Transition && changed && record.prisoner != 0 {
            return Some(format!("p{} reconfigured a room during a transition", record.prisoner));
        }
        if from_phase == Phase::Transition && self.phase(to) != Phase::Transition {
            let up = to.rooms.iter().filter(|&&c| inst.decode(c).0 == room_phase::UP).count();
            if up != 1 {
                return Some(format!("phase started with {up} UP rooms"));
            }
        }
        None
    }
}

/// DONE rooms are never reconfigured, and their number tracks the leader.
pub struct SixDone {
    done: Vec<u32>,
}

impl Monitor for SixDone {
    fn id(&self) -> &str {
        "six-done"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        let done_rooms = rooms(inst, world).iter().filter(|&&c| c == crate::library::six::DONE).count() as u32;
        let done = self.done[(world.prisoners[0].pc as usize).min(self.done.len() - 1)];
        (done_rooms != done).then(|| format!("{done_rooms} DONE rooms after {done} leader rounds"))
    }

    fn check_edge(
        &mut self,
        inst: &ProtocolInstance,
        _from: &WorldState,
        record: &StepRecord,
        _to: &WorldState,
        _own_to: Option<&OwnState>,
    ) -> Option<String> {
        let done = Config(crate::library::six::DONE);
        let (a, b) = (inst.decode(record.config_before), inst.decode(record.config_after));
        (a == done && b != done).then(|| format!("p{} reconfigured a DONE room", record.prisoner))
    }
}

/// Phase claims for the three-configuration probability-1 protocol.
pub struct Prob1Phases {
    regions: Vec<Vec<String>>,
}

fn is_phase(region: &str) -> bool {
    matches!(region, "phase0" | "phase1" | "phase2")
}

fn started(region: &str) -> bool {
    !matches!(region, "pre" | "see")
}

impl Prob1Phases {
    fn active(&self, world: &WorldState) -> Vec<usize> {
        (0..self.regions.len()).filter(|&p| is_phase(region_of(&self.regions, world, p))).collect()
    }

    /// All rooms equal `c` and every prisoner but `skip` sits on one of `ops`.
    fn snapshot(&self, inst: &ProtocolInstance, world: &WorldState, c: u8, skip: Option<usize>, ops: &[(u8, u8)], see: bool) -> Option<String> {
        let rooms = rooms(inst, world);
        if rooms.iter().any(|&x| x != c) {
            return Some(format!("rooms {} at a phase boundary, expected all {c}", fmt_rooms(&rooms)));
        }
        let mut seeing = 0;
        for p in (0..inst.n).filter(|&p| Some(p) != skip) {
            let op = op_at(inst, world, p);
            if see && matches!(op, Some(Op::See(x)) if x.0 == 1) {
                seeing += 1;
                continue;
            }
            if !ops.iter().any(|&(a, b)| is_flip(op, a, b)) {
                return Some(format!("p{p} is on {op:?} at a phase boundary"));
            }
        }
        (seeing > 1).then(|| format!("{seeing} prisoners on See(1) at a phase boundary"))
    }
}

impl Monitor for Prob1Phases {
    fn id(&self) -> &str {
        "prob1-phases"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        let active = self.active(world);
        if active.len() > 1 {
            return Some(format!("prisoners {active:?} active at once"));
        }
        for j in 1..inst.n {
            if started(region_of(&self.regions, world, j)) {
                if let Some(i) = (0..j).find(|&i| !started(region_of(&self.regions, world, i))) {
                    return Some(format!("p{j} started before p{i}"));
                }
            }
        }
        let allowed: [u8; 2] = match active.first().map(|&p| region_of(&self.regions, world, p)) {
            Some("phase1") => [1, 2],
            Some("phase2") => [2, 0],
            _ => [0, 1],
        };
        let rooms = rooms(inst, world);
        if rooms.iter().any(|c| !allowed.contains(c)) {
            return Some(format!("rooms {} outside {allowed:?}", fmt_rooms(&rooms)));
        }
        let initial = world.prisoners.iter().all(|s| s.pc == 0) && world.visits.iter().all(|&v| v == 0);
        if initial {
            return self.snapshot(inst, world, 0, Some(0), &[(1, 0)], true);
        }
        None
    }

    fn check_edge(
        &mut self,
        inst: &ProtocolInstance,
        from: &WorldState,
        record: &StepRecord,
        to: &WorldState,
        _own_to: Option<&OwnState>,
    ) -> Option<String> {
        let p = record.prisoner;
        let before = region_of(&self.regions, from, p).to_string();
        let after = region_of(&self.regions, to, p);
        match (before.as_str(), after) {
            ("phase2", "osc") => self.snapshot(inst, to, 0, Some(p), &[(1, 0)], true),
            ("phase0", "phase1") => self.snapshot(inst, to, 1, Some(p), &[(2, 1)], false),
            ("phase1", "phase2") => self.snapshot(inst, to, 2, Some(p), &[(0, 2)], false),
            _ => None,
        }
    }
}

/// Imbalance bookkeeping for the two-configuration probability-epsilon
/// protocol: the total equals the number of rooms in 1, and per-prisoner
/// imbalance follows its phase.
pub struct Imbalance {
    regions: Vec<Vec<String>>,
    imbalance: Vec<Vec<i64>>,
}

impl Monitor for Imbalance {
    fn id(&self) -> &str {
        "imbalance"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        let r = inst.r as i64;
        let ones = rooms(inst, world).iter().filter(|&&c| c == 1).count() as i64;
        let mut total = 0;
        for p in 0..inst.n {
            let pc = world.prisoners[p].pc as usize;
            let imb = self.imbalance[p][pc.min(self.imbalance[p].len() - 1)];
            total += imb;
            let region = region_of(&self.regions, world, p);
            let k = p as i64;
            if pc > 0 && matches!(region, "startup" | "check") {
                let floor = if k == 0 { 0 } else { 1 };
                if imb < floor {
                    return Some(format!("p{p} has imbalance {imb} before cooldown"));
                }
            }
            if region == "end" && p + 1 < inst.n && imb != -1 {
                return Some(format!("p{p} finished with imbalance {imb}"));
            }
            if region == "cooldown" && imb < 0 {
                return Some(format!("p{p} has imbalance {imb} during cooldown"));
            }
            let steps = inst.program(p).steps();
            let boundary = pc > 0 && pc <= steps.len() && {
                let prev = inst.program(p).region_at(pc as u32 - 1).unwrap_or("end");
                let here = region_of(&self.regions, world, p);
                let end_of_check = prev == "check" && here != "check";
                let end_of_startup = prev == "startup" && here != "startup";
                end_of_check || end_of_startup
            };
            if boundary && imb != r + k {
                return Some(format!("p{p} ends a phase with imbalance {imb}, expected {}", r + k));
            }
        }
        if total != ones || !(0..=r).contains(&total) {
            return Some(format!("total imbalance {total} with {ones} rooms in 1"));
        }
        None
    }
}

/// A prisoner whose cursor is terminal has visited every room.
pub struct KnowledgeMonitor;

impl Monitor for KnowledgeMonitor {
    fn id(&self) -> &str {
        "knowledge"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, _own: Option<&OwnState>) -> Option<String> {
        (0..inst.n)
            .find(|&p| inst.is_terminal(p, &world.prisoners[p]) && world.visits_of(p).iter().any(|&v| v == 0))
            .map(|p| format!("p{p} finished its program without visiting every room"))
    }
}

/// At a declaration every prisoner provably owns every configuration.
pub struct DeclareOwn;

impl Monitor for DeclareOwn {
    fn id(&self) -> &str {
        "declare-own"
    }

    fn check_edge(
        &mut self,
        inst: &ProtocolInstance,
        _from: &WorldState,
        record: &StepRecord,
        _to: &WorldState,
        own_to: Option<&OwnState>,
    ) -> Option<String> {
        let own = own_to?;
        let missing = (0..inst.n).find(|&p| !own.owns_all(inst.m, p));
        match missing {
            Some(p) if record.declared => Some(format!("p{} declared while p{p} does not provably own everything", record.prisoner)),
            _ => None,
        }
    }

    fn needs_ownership(&self) -> bool {
        true
    }
}

/// A finished prisoner has at some point provably owned every configuration.
pub struct FinishOwn {
    oracles: Vec<ActivityOracle>,
}

impl Monitor for FinishOwn {
    fn id(&self) -> &str {
        "finish-own"
    }

    fn check_state(&mut self, inst: &ProtocolInstance, world: &WorldState, own: Option<&OwnState>) -> Option<String> {
        let own = own?;
        (0..inst.n)
            .find(|&p| !own.ever_all[p] && !self.oracles[p].can_act(inst.program(p), world.prisoners[p]))
            .map(|p| format!("p{p} finished before provably owning every configuration"))
    }

    fn needs_ownership(&self) -> bool {
        true
    }
}

fn imbalance_table(program: &Program) -> Vec<i64> {
    let up = steps_before(program, |_, op| is_flip(Some(op), 0, 1));
    let down = steps_before(program, |_, op| is_flip(Some(op), 1, 0));
    up.iter().zip(&down).map(|(&u, &d)| u as i64 - d as i64).collect()
}

fn region_steps(program: &Program, names: &[&str]) -> Vec<u32> {
    let regions = regions(program);
    steps_before(program, |i, _| names.contains(&regions[i].as_str()))
}

/// Build a monitor by id for `inst`.
pub fn monitor_by_id(id: &str, inst: &ProtocolInstance) -> Result<Box<dyn Monitor>> {
    let family_is = |f: Family| {
        if inst.family == f && !inst.wrapped && !inst.forced_flip {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("monitor {id} does not apply to {}", inst.id)))
        }
    };
    let all_regions = || inst.programs.iter().map(regions).collect::<Vec<_>>();
    Ok(match id {
        "two-switch-disjunction" => {
            family_is(Family::TwoSwitchPrisoner)?;
            Box::new(TwoSwitchDisjunction { life: lifecycle(inst) })
        }
        "two-switch-count" => {
            family_is(Family::TwoSwitchPrisoner)?;
            Box::new(TwoSwitchCount { life: lifecycle(inst), acks: region_steps(inst.program(0), &["count"]) })
        }
        "room-phase" => {
            family_is(Family::TwoSwitchRoom)?;
            if inst.multi_declare {
                return Err(Error::Unsupported("room-phase on a multi-declare instance".into()));
            }
            let done = region_steps(inst.program(0), &["zero-done", "one-done"]);
            Box::new(RoomPhase { regions: all_regions(), done })
        }
        "six-done" => {
            family_is(Family::RoomAtATimeSix)?;
            use crate::library::six::{DONE, ZERO_P};
            let done = steps_before(inst.program(0), |_, op| is_flip(Some(op), ZERO_P, DONE));
            Box::new(SixDone { done })
        }
        "prob1-phases" => {
            family_is(Family::Prob1)?;
            Box::new(Prob1Phases { regions: all_regions() })
        }
        "imbalance" => {
            family_is(Family::ProbEps)?;
            Box::new(Imbalance { regions: all_regions(), imbalance: inst.programs.iter().map(imbalance_table).collect() })
        }
        "knowledge" => Box::new(KnowledgeMonitor),
        "declare-own" | "finish-own" if inst.forced_flip => {
            return Err(Error::Unsupported(format!("monitor {id} on a forced-flip instance")));
        }
        "declare-own" => Box::new(DeclareOwn),
        "finish-own" => Box::new(FinishOwn { oracles: (0..inst.n).map(|_| ActivityOracle::new(inst.m)).collect() }),
        other => return Err(Error::Unknown(format!("monitor {other}"))),
    })
}

/// The phase monitors registered for the instance's family.
pub fn monitors_for(inst: &ProtocolInstance) -> Vec<Box<dyn Monitor>> {
    let ids: &[&str] = match inst.family {
        Family::TwoSwitchPrisoner => &["two-switch-disjunction", "two-switch-count"],
        Family::TwoSwitchRoom => &["room-phase"],
        Family::RoomAtATimeSix => &["six-done"],
        Family::Prob1 => &["prob1-phases"],
        Family::ProbEps => &["imbalance"],
        Family::Knowledge => &["knowledge"],
        _ => &[],
    };
    ids.iter().filter_map(|id| monitor_by_id(id, inst).ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{two_config_prob_eps, two_switch_prisoner};

    #[test]
    fn imbalance_follows_flips() {
        let inst = two_config_prob_eps(2, 2).unwrap();
        let t = imbalance_table(inst.program(0));
        // startup 2, check 2 + 2, cooldown 3
        assert_eq!(t, vec![0, 1, 2, 1, 0, 1, 2, 1, 0, -1]);
    }

    #[test]
    fn lifecycle_of_two_switch() {
        let inst = two_switch_prisoner(2, 2).unwrap();
        let life = lifecycle(&inst);
        assert_eq!(life[0].first(), Some(&Life::Active));
        assert_eq!(life[0].last(), Some(&Life::Exhausted));
        assert_eq!(life[1][0], Life::Waiting);
        assert_eq!(life[1].last(), Some(&Life::Exhausted));
    }

    #[test]
    fn unknown_and_inapplicable_ids() {
        let inst = two_switch_prisoner(2, 2).unwrap();
        assert!(matches!(monitor_by_id("nope", &inst), Err(Error::Unknown(_))));
        assert!(matches!(monitor_by_id("room-phase", &inst), Err(Error::Unsupported(_))));
        assert_eq!(monitors_for(&inst).len(), 2);
    }
}
