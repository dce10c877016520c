//! Every concrete protocol and protocol transform, packaged as a
//! [`ProtocolInstance`] with its claimed guarantee.
//!
//! Index 0 is always the leader (or `p_0`, or "prisoner 1" of the
//! listings). Configuration 0 is always the protocol's initial
//! configuration unless a start vector says otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{
    flip, repeat, see, Config, Instruction, Op, PrisonerState, Program, ProgramBuilder, VisitOutcome,
};
use crate::world::WinCondition;

/// The strongest guarantee a protocol claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Guarantee {
    Winning,
    Prob1,
    ProbEps,
    KnowledgeOnly,
    /// Not claimed to win; used for strategies fed to adversaries.
    Unclaimed,
}

impl Guarantee {
    pub fn name(self) -> &'static str {
        match self {
            Guarantee::Winning => "winning",
            Guarantee::Prob1 => "prob1",
            Guarantee::ProbEps => "prob-eps",
            Guarantee::KnowledgeOnly => "knowledge-only",
            Guarantee::Unclaimed => "unclaimed",
        }
    }
}

/// Which construction produced an instance; monitors and transforms key off it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    OneRoomKnown,
    OneRoomUnknown,
    AtLeastOneRoom,
    SequentialChain,
    RoomAtATimeSix,
    TwoSwitchPrisoner,
    TwoSwitchRoom,
    Knowledge,
    Prob1,
    ProbEps,
    TwoRoomsThreeConfigs,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolInstance {
    pub id: String,
    pub family: Family,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub programs: Vec<Program>,
    pub start: Vec<Config>,
    pub guarantee: Guarantee,
    pub win: WinCondition,
    pub config_names: Vec<String>,
    /// Prepended by the arbitrary-start wrapper.
    pub wrapped: bool,
    pub multi_declare: bool,
    pub ell: u32,
    /// Every visit must change the room; configs are encoded as `2c + parity`.
    pub forced_flip: bool,
}

impl ProtocolInstance {
    #[allow(clippy::too_many_arguments)]
    fn new(
        id: String,
        family: Family,
        n: usize,
        r: usize,
        names: &[&str],
        programs: Vec<Program>,
        start: Config,
        guarantee: Guarantee,
    ) -> Result<ProtocolInstance> {
        let inst = ProtocolInstance {
            id,
            family,
            n,
            r,
            m: names.len(),
            programs,
            start: vec![start; r],
            guarantee,
            win: WinCondition::default(),
            config_names: names.iter().map(|s| s.to_string()).collect(),
            wrapped: false,
            multi_declare: false,
            ell: 1,
            forced_flip: false,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.programs.len() != self.n {
            return Err(Error::Construction(format!("{} programs for {} prisoners", self.programs.len(), self.n)));
        }
        if self.start.len() != self.r || self.r == 0 {
            return Err(Error::Construction(format!("start vector has {} rooms, expected {}", self.start.len(), self.r)));
        }
        let base_m = if self.forced_flip { self.m / 2 } else { self.m };
        for p in &self.programs {
            if let Some(c) = p.max_config() {
                if c.index() >= base_m {
                    return Err(Error::Construction(format!("{} references config {c} >= {base_m}", p.label())));
                }
            }
        }
        if let Some(c) = self.start.iter().find(|c| c.index() >= self.m) {
            return Err(Error::Construction(format!("start config {c} >= {}", self.m)));
        }
        Ok(())
    }

    pub fn program(&self, prisoner: usize) -> &Program {
        &self.programs[prisoner]
    }

    /// Configuration count seen by the programs themselves.
    pub fn program_m(&self) -> usize {
        if self.forced_flip {
            self.m / 2
        } else {
            self.m
        }
    }

    /// The program-level configuration a room config stands for.
    pub fn decode(&self, c: Config) -> Config {
        if self.forced_flip {
            Config(c.0 / 2)
        } else {
            c
        }
    }

    pub fn name_of(&self, c: Config) -> &str {
        self.config_names.get(c.index()).map(String::as_str).unwrap_or("?")
    }

    pub fn config_by_name(&self, name: &str) -> Option<Config> {
        self.config_names.iter().position(|n| n == name).map(|i| Config(i as u8))
    }

    /// One visit of `prisoner` into a room showing `observed`.
    pub fn visit(&self, prisoner: usize, state: PrisonerState, observed: Config) -> (PrisonerState, VisitOutcome) {
        let program = &self.programs[prisoner];
        if !self.forced_flip {
            return program.visit(state, observed);
        }
        let base = Config(observed.0 / 2);
        let parity = observed.0 % 2;
        let (next, out) = program.visit(state, base);
        let new_config = if out.new_config != base {
            Config(out.new_config.0 * 2 + parity)
        } else {
            Config(observed.0 ^ 1)
        };
        (next, VisitOutcome { new_config, ..out })
    }

    pub fn is_terminal(&self, prisoner: usize, state: &PrisonerState) -> bool {
        self.programs[prisoner].is_terminal(state)
    }

    fn renamed(mut self, id: String) -> Self {
        self.id = id;
        self
    }
}

const OFF: u8 = 0;
const ON: u8 = 1;

fn need(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Unsupported(msg.into()))
    }
}

fn count(v: usize) -> u32 {
    v as u32
}

/// One room, known start OFF: the leader counts `n - 1` signals.
pub fn one_room_known(n: usize) -> Result<ProtocolInstance> {
    one_room_known_with_rooms(n, 1)
}

/// The one-room strategy run unchanged in `r` rooms.
pub fn one_room_known_per_room(n: usize, r: usize) -> Result<ProtocolInstance> {
    need(r >= 1, "r >= 1")?;
    let mut inst = one_room_known_with_rooms(n, r)?;
    inst.guarantee = if r == 1 { Guarantee::Winning } else { Guarantee::Unclaimed };
    Ok(inst.renamed(format!("one-room-known-per-room(n={n},r={r})")))
}

fn one_room_known_with_rooms(n: usize, r: usize) -> Result<ProtocolInstance> {
    need(n >= 1, "n >= 1")?;
    let mut programs = Vec::with_capacity(n);
    if n == 1 {
        programs.push(Program::new("leader", vec![see(OFF), Instruction::Declare])?);
    } else {
        programs.push(Program::new("leader", vec![repeat(count(n - 1), vec![flip(ON, OFF)]), Instruction::Declare])?);
        for i in 1..n {
            programs.push(Program::new(format!("p{i}"), vec![flip(OFF, ON)])?);
        }
    }
    ProtocolInstance::new(
        format!("one-room-known(n={n})"),
        Family::OneRoomKnown,
        n,
        r,
        &["OFF", "ON"],
        programs,
        Config(OFF),
        Guarantee::Winning,
    )
}

/// One room, unknown start: everyone signals twice.
pub fn one_room_unknown(n: usize, start: Config) -> Result<ProtocolInstance> {
    one_room_unknown_with_rooms(n, 1, start)
}

pub fn one_room_unknown_per_room(n: usize, r: usize, start: Config) -> Result<ProtocolInstance> {
    need(r >= 1, "r >= 1")?;
    let mut inst = one_room_unknown_with_rooms(n, r, start)?;
    inst.guarantee = if r == 1 { Guarantee::Winning } else { Guarantee::Unclaimed };
    Ok(inst.renamed(format!("one-room-unknown-per-room(n={n},r={r})")))
}

fn one_room_unknown_with_rooms(n: usize, r: usize, start: Config) -> Result<ProtocolInstance> {
    need(n >= 2, "n >= 2")?;
    need(start.index() < 2, "start must be OFF or ON")?;
    let mut programs = vec![Program::new(
        "leader",
        vec![repeat(count(2 * n - 2), vec![flip(ON, OFF)]), Instruction::Declare],
    )?];
    for i in 1..n {
        programs.push(Program::new(format!("p{i}"), vec![repeat(2, vec![flip(OFF, ON)])])?);
    }
    let names = ["OFF", "ON"];
    ProtocolInstance::new(
        format!("one-room-unknown(n={n},start={})", names[start.index()]),
        Family::OneRoomUnknown,
        n,
        r,
        &names,
        programs,
        start,
        Guarantee::Winning,
    )
}

/// Relaxed objective: every prisoner visits at least one room.
pub fn at_least_one_room(n: usize, r: usize) -> Result<ProtocolInstance> {
    need(n >= 2 && r >= 1, "n >= 2, r >= 1")?;
    let mut programs = vec![Program::new(
        "leader",
        vec![repeat(count((r + 1) * (n - 1)), vec![flip(ON, OFF)]), Instruction::Declare],
    )?];
    for i in 1..n {
        programs.push(Program::new(format!("p{i}"), vec![repeat(count(r + 1), vec![flip(OFF, ON)])])?);
    }
    let mut inst = ProtocolInstance::new(
        format!("at-least-one-room(n={n},r={r})"),
        Family::AtLeastOneRoom,
        n,
        r,
        &["OFF", "ON"],
        programs,
        Config(OFF),
        Guarantee::Winning,
    )?;
    inst.win = WinCondition::AtLeastOneRoom;
    Ok(inst)
}

/// Prisoner `i` moves every room from `i - 1` to `i`; `m = n + 1`.
pub fn sequential_chain(n: usize, r: usize) -> Result<ProtocolInstance> {
    need(n >= 1 && r >= 1, "n >= 1, r >= 1")?;
    need(n < 255, "n < 255")?;
    let mut programs = Vec::with_capacity(n);
    for i in 1..=n {
        let mut instrs = vec![repeat(count(r), vec![flip((i - 1) as u8, i as u8)])];
        if i == n {
            instrs.push(Instruction::Declare);
        }
        programs.push(Program::new(format!("p{}", i - 1), instrs)?);
    }
    let names: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    ProtocolInstance::new(
        format!("sequential-chain(n={n},r={r})"),
        Family::SequentialChain,
        n,
        r,
        &names,
        programs,
        Config(0),
        Guarantee::Winning,
    )
}

pub mod six {
    pub const OFF: u8 = 0;
    pub const DONE: u8 = 1;
    pub const ZERO: u8 = 2;
    pub const ONE: u8 = 3;
    pub const ZERO_P: u8 = 4;
    pub const ONE_P: u8 = 5;
}

/// One room at a time with six configurations.
pub fn room_at_a_time_six(n: usize, r: usize) -> Result<ProtocolInstance> {
    use six::*;
    need(n >= 2 && r >= 1, "n >= 2, r >= 1")?;
    let k = count(n - 1);
    let leader = Program::new(
        "leader",
        vec![
            repeat(
                count(r),
                vec![
                    flip(OFF, ZERO),
                    repeat(k, vec![flip(ONE, ZERO)]),
                    flip(ZERO, ZERO_P),
                    repeat(k, vec![flip(ONE_P, ZERO_P)]),
                    flip(ZERO_P, DONE),
                ],
            ),
            Instruction::Declare,
        ],
    )?;
    let mut programs = vec![leader];
    for i in 1..n {
        programs.push(Program::new(format!("p{i}"), vec![repeat(count(r), vec![flip(ZERO, ONE), flip(ZERO_P, ONE_P)])])?);
    }
    ProtocolInstance::new(
        format!("room-at-a-time-six(n={n},r={r})"),
        Family::RoomAtATimeSix,
        n,
        r,
        &["OFF", "DONE", "0", "1", "0'", "1'"],
        programs,
        Config(OFF),
        Guarantee::Winning,
    )
}

pub mod two_switch {
    pub const ZERO: u8 = 0;
    pub const ONE: u8 = 1;
    pub const NEXT: u8 = 2;
    pub const READY: u8 = 3;
}

/// Two switches, one prisoner at a time.
pub fn two_switch_prisoner(n: usize, r: usize) -> Result<ProtocolInstance> {
    two_switch_prisoner_counted(n, r, n, 1)
}

fn two_switch_prisoner_counted(n: usize, r: usize, acks: usize, ell: u32) -> Result<ProtocolInstance> {
    use two_switch::*;
    need(n >= 2 && r >= 1, "n >= 2, r >= 1")?;
    need(ell >= 1, "ell >= 1")?;
    let tour = || {
        let on = repeat(count(r), vec![flip(ZERO, ONE)]);
        let off = repeat(count(r), vec![flip(ONE, ZERO)]);
        if ell == 1 {
            vec![on, off]
        } else {
            vec![repeat(ell, vec![on, off])]
        }
    };
    let mut leader = ProgramBuilder::new("leader");
    for i in tour() {
        leader = leader.region("tour", i);
    }
    let leader = leader
        .region("signal", flip(ZERO, NEXT))
        .region("count", repeat(count(acks), vec![flip(NEXT, READY)]))
        .region("declare", Instruction::Declare)
        .build()?;
    let mut programs = vec![leader];
    for i in 1..n {
        let mut b = ProgramBuilder::new(format!("p{i}")).region("wait", flip(READY, ZERO));
        for t in tour() {
            b = b.region("tour", t);
        }
        programs.push(b.region("signal", flip(ZERO, NEXT)).build()?);
    }
    let mut inst = ProtocolInstance::new(
        format!("two-switch-prisoner(n={n},r={r})"),
        Family::TwoSwitchPrisoner,
        n,
        r,
        &["0", "1", "NEXT", "READY"],
        programs,
        Config(ZERO),
        Guarantee::Winning,
    )?;
    inst.ell = ell;
    if ell > 1 {
        inst.win = WinCondition::AllRoomsAllPrisoners { min_visits: ell };
    }
    Ok(inst)
}

pub mod room_phase {
    pub const ZERO: u8 = 0;
    pub const ONE: u8 = 1;
    pub const UP: u8 = 2;
    pub const DONE: u8 = 3;
}

/// Two switches, one room at a time; odd `r >= 3` only.
///
/// The leader's outer loop is unrolled so that the transition-phase counts
/// become the constants `r - (2j - 1)` and `r - 2j`.
pub fn two_switch_room(n: usize, r: usize) -> Result<ProtocolInstance> {
    use room_phase::*;
    need(n >= 2, "n >= 2")?;
    need(r >= 3 && r % 2 == 1, format!("two-switch-room needs odd r >= 3, got r = {r}"))?;
    let rounds = (r - 1) / 2;
    let mut leader = ProgramBuilder::new("leader");
    for j in 1..=rounds {
        leader = leader
            .region("zero-start", flip(ZERO, UP))
            .region("zero-count", repeat(count(n - 2), vec![flip(ONE, UP)]))
            .region("zero-done", flip(ONE, DONE))
            .region("to-one", repeat(count(r - (2 * j - 1)), vec![flip(ZERO, ONE)]))
            .region("one-start", flip(ONE, UP))
            .region("one-count", repeat(count(n - 2), vec![flip(ZERO, UP)]))
            .region("one-done", flip(ZERO, DONE))
            .region("to-zero", repeat(count(r - 2 * j), vec![flip(ONE, ZERO)]));
    }
    let mut programs = vec![leader.region("declare", Instruction::Declare).build()?];
    for i in 1..n {
        let mut other = ProgramBuilder::new(format!("p{i}"));
        for _ in 0..rounds {
            other = other
                .region("zero-sync", repeat(count(n), vec![see(ZERO), see(UP)]))
                .region("zero-flip", flip(UP, ONE))
                .region("one-sync", repeat(count(n), vec![see(ONE), see(UP)]))
                .region("one-flip", flip(UP, ZERO));
        }
        programs.push(other.build()?);
    }
    ProtocolInstance::new(
        format!("two-switch-room(n={n},r={r})"),
        Family::TwoSwitchRoom,
        n,
        r,
        &["0", "1", "UP", "DONE"],
        programs,
        Config(ZERO),
        Guarantee::Winning,
    )
}

/// Every non-leader is inert until it sees a config outside `{0, 1}`, and
/// the base starts all rooms at 0.
pub fn satisfies_reduction_hypothesis(base: &ProtocolInstance) -> bool {
    let inert = |op: &Op| match op {
        Op::Flip { from, .. } => from.0 > 1,
        Op::See(c) => c.0 > 1,
        Op::FlipNotIn { excluded, .. } => excluded.contains(&Config(0)) && excluded.contains(&Config(1)),
        Op::Oscillate { first, second, .. } => first.0 > 1 && second.0 > 1,
        Op::Declare => false,
    };
    base.start.iter().all(|c| c.0 == 0)
        && !base.forced_flip
        && base.programs[1..].iter().all(|p| p.steps().first().map_or(true, |s| inert(&s.op)))
}

/// Cleanup phase that reduces any known start to the all-0 start.
pub fn arbitrary_start_wrapper(base: &ProtocolInstance, start: &[Config]) -> Result<ProtocolInstance> {
    if !satisfies_reduction_hypothesis(base) {
        return Err(Error::Construction(format!("{} violates the arbitrary-start hypothesis", base.id)));
    }
    if base.wrapped {
        return Err(Error::Construction("already wrapped".into()));
    }
    let (n, r) = (base.n, base.r);
    if start.len() != r {
        return Err(Error::Construction(format!("start has {} rooms, expected {r}", start.len())));
    }
    if let Some(c) = start.iter().find(|c| c.index() >= base.m) {
        return Err(Error::Construction(format!("start config {c} >= {}", base.m)));
    }
    let r0 = start.iter().filter(|c| c.0 == 0).count();
    let r1 = start.iter().filter(|c| c.0 == 1).count();
    let mut programs = Vec::with_capacity(n);
    programs.push(base.programs[0].with_prefix(
        vec![
            repeat(count(r - r0 - r1), vec![Instruction::FlipNotIn { excluded: vec![Config(0), Config(1)], to: Config(1) }]),
            repeat(count(r - r0 + (n - 1) * (r0 + 1)), vec![flip(1, 0)]),
        ],
        "cleanup",
    )?);
    for p in &base.programs[1..] {
        programs.push(p.with_prefix(vec![repeat(count(r0 + 1), vec![flip(0, 1)])], "cleanup")?);
    }
    let names: Vec<&str> = start.iter().map(|c| base.name_of(*c)).collect();
    let mut inst = base.clone();
    inst.id = format!("arbitrary-start[{}]({})", names.join(","), base.id);
    inst.programs = programs;
    inst.start = start.to_vec();
    inst.wrapped = true;
    inst.validate()?;
    Ok(inst)
}

pub mod knowledge {
    pub const OFF: u8 = 0;
    pub const ON: u8 = 1;
    pub const NEXT: u8 = 2;
}

/// Three configurations; every prisoner eventually knows it has toured.
pub fn three_config_knowledge(n: usize, r: usize) -> Result<ProtocolInstance> {
    three_config_knowledge_with(n, r, true)
}

fn three_config_knowledge_with(n: usize, r: usize, prepend: bool) -> Result<ProtocolInstance> {
    use knowledge::*;
    need(n >= 1 && r >= 1, "n >= 1, r >= 1")?;
    let body = |label: String| {
        ProgramBuilder::new(label)
            .region("wait", flip(NEXT, OFF))
            .region("tour", repeat(count(r), vec![flip(OFF, ON)]))
            .region("tour", repeat(count(r), vec![flip(ON, OFF)]))
            .region("signal", flip(OFF, NEXT))
            .build()
    };
    let mut programs = Vec::with_capacity(n);
    let leader = body("leader".into())?;
    programs.push(if prepend { leader.with_prefix(vec![flip(OFF, NEXT)], "start")? } else { leader });
    for i in 1..n {
        programs.push(body(format!("p{i}"))?);
    }
    ProtocolInstance::new(
        format!("knowledge-3config(n={n},r={r})"),
        Family::Knowledge,
        n,
        r,
        &["OFF", "ON", "NEXT"],
        programs,
        Config(OFF),
        Guarantee::KnowledgeOnly,
    )
}

/// Three configurations, wins with probability 1.
pub fn three_config_prob1(n: usize, r: usize) -> Result<ProtocolInstance> {
    three_config_prob1_with(n, r, true)
}

fn three_config_prob1_with(n: usize, r: usize, with_see: bool) -> Result<ProtocolInstance> {
    need(n >= 2 && r >= 1, "n >= 2, r >= 1")?;
    let phase = count(n + r - 1);
    let mut programs = Vec::with_capacity(n);
    for k in 1..=n {
        let mut b = ProgramBuilder::new(format!("p{}", k - 1));
        if k != 1 {
            b = b.region("pre", repeat(count(k - 1), vec![flip(1, 0), flip(2, 1), flip(0, 2)]));
            // The second prisoner is the one the mutation strips.
            if with_see || k != 2 {
                b = b.region("see", see(1));
            }
        }
        b = b
            .region("phase0", repeat(phase, vec![flip(0, 1)]))
            .region("phase1", repeat(phase, vec![flip(1, 2)]))
            .region("phase2", repeat(phase, vec![flip(2, 0)]));
        if k != n {
            b = b
                .region("osc", Instruction::Oscillate { first: Config(1), second: Config(0), k: 1 })
                .region("post", repeat(count(n - k), vec![flip(2, 1), flip(0, 2), flip(1, 0)]));
        } else {
            b = b.region("declare", Instruction::Declare);
        }
        programs.push(b.build()?);
    }
    ProtocolInstance::new(
        format!("prob1-3config(n={n},r={r})"),
        Family::Prob1,
        n,
        r,
        &["0", "1", "2"],
        programs,
        Config(0),
        Guarantee::Prob1,
    )
}

/// Two configurations, wins with probability epsilon.
pub fn two_config_prob_eps(n: usize, r: usize) -> Result<ProtocolInstance> {
    need(n >= 2 && r >= 1, "n >= 2, r >= 1")?;
    let mut programs = Vec::with_capacity(n);
    for k in 0..n {
        let startup = if k == n - 1 { r + n - 1 } else { r + k };
        let mut b = ProgramBuilder::new(format!("p{k}"))
            .region("startup", repeat(count(startup), vec![flip(0, 1)]))
            .region("check", repeat(count(r), vec![flip(1, 0)]))
            .region("check", repeat(count(r), vec![flip(0, 1)]));
        b = if k == n - 1 {
            b.region("declare", Instruction::Declare)
        } else {
            b.region("cooldown", repeat(count(r + k + 1), vec![flip(1, 0)]))
        };
        programs.push(b.build()?);
    }
    ProtocolInstance::new(
        format!("two-config-prob-eps(n={n},r={r})"),
        Family::ProbEps,
        n,
        r,
        &["0", "1"],
        programs,
        Config(0),
        Guarantee::ProbEps,
    )
}

pub mod two_rooms {
    pub const OFF: u8 = 0;
    pub const ON: u8 = 1;
    pub const UP: u8 = 2;
}

/// Two rooms, three configurations: one room is parked in UP.
pub fn two_rooms_three_configs(n: usize) -> Result<ProtocolInstance> {
    use two_rooms::*;
    need(n >= 2, "n >= 2")?;
    let mut programs = vec![Program::new(
        "leader",
        vec![flip(OFF, UP), repeat(count(n - 1), vec![flip(ON, OFF)]), Instruction::Declare],
    )?];
    for i in 1..n {
        programs.push(Program::new(format!("p{i}"), vec![see(UP), flip(OFF, ON)])?);
    }
    ProtocolInstance::new(
        format!("two-rooms-3config(n={n})"),
        Family::TwoRoomsThreeConfigs,
        n,
        2,
        &["OFF", "ON", "UP"],
        programs,
        Config(OFF),
        Guarantee::Winning,
    )
}

/// Every prisoner declares: the leader parks a DONE room in UP after
/// declaring, the others declare on seeing it.
pub fn with_multiple_declarations(base: &ProtocolInstance) -> Result<ProtocolInstance> {
    use room_phase::*;
    if base.family != Family::TwoSwitchRoom || base.wrapped || base.forced_flip || base.multi_declare {
        return Err(Error::Construction("multiple declarations need a plain two-switch-room base".into()));
    }
    let mut inst = base.clone();
    inst.programs[0] = base.programs[0].with_suffix(vec![flip(DONE, UP)], "release")?;
    for p in inst.programs.iter_mut().skip(1) {
        *p = p.with_suffix(vec![see(UP), Instruction::Declare], "release")?;
    }
    inst.id = format!("multi-declare({})", base.id);
    inst.multi_declare = true;
    inst.win = WinCondition::AllMustDeclare;
    Ok(inst)
}

/// Each prisoner repeats its tour block `ell` times.
pub fn with_repeated_entries(base: &ProtocolInstance, ell: u32) -> Result<ProtocolInstance> {
    if base.family != Family::TwoSwitchPrisoner || base.wrapped || base.forced_flip || base.ell != 1 {
        return Err(Error::Construction("repeated entries need a plain two-switch-prisoner base".into()));
    }
    if ell == 0 {
        return Err(Error::Construction("ell must be positive".into()));
    }
    let acks = base.programs[0]
        .instructions()
        .iter()
        .find_map(|i| match i {
            Instruction::Repeat { count, body } if body == &vec![flip(two_switch::NEXT, two_switch::READY)] => {
                Some(*count as usize)
            }
            _ => None,
        })
        .unwrap_or(base.n);
    let mut inst = two_switch_prisoner_counted(base.n, base.r, acks, ell)?;
    inst.id = format!("repeated-entries(ell={ell},{})", base.id);
    inst.guarantee = base.guarantee;
    Ok(inst)
}

/// Doubles the configurations so that every visit changes the room.
pub fn forced_flip_transform(base: &ProtocolInstance) -> Result<ProtocolInstance> {
    if base.forced_flip {
        return Err(Error::Construction("forced-flip applied twice".into()));
    }
    if base.m * 2 > 256 {
        return Err(Error::Unsupported("too many configurations to double".into()));
    }
    let mut inst = base.clone();
    inst.m = base.m * 2;
    inst.start = base.start.iter().map(|c| Config(c.0 * 2)).collect();
    inst.config_names = base
        .config_names
        .iter()
        .flat_map(|name| [format!("{name}.a"), format!("{name}.b")])
        .collect();
    inst.forced_flip = true;
    inst.id = format!("forced-flip({})", base.id);
    inst.validate()?;
    Ok(inst)
}

/// Leader acknowledges only `n - 1` NEXT signals.
pub fn mutant_two_switch_count(n: usize, r: usize) -> Result<ProtocolInstance> {
    let inst = two_switch_prisoner_counted(n, r, n - 1, 1)?;
    Ok(inst.renamed(format!("mutant-two-switch-count(n={n},r={r})")))
}

/// Prisoner 2 loses its See(1).
pub fn mutant_prob1_no_see(n: usize, r: usize) -> Result<ProtocolInstance> {
    let inst = three_config_prob1_with(n, r, false)?;
    Ok(inst.renamed(format!("mutant-prob1-no-see(n={n},r={r})")))
}

/// The leader's initial Flip(OFF -> NEXT) is dropped.
pub fn mutant_knowledge_no_prepend(n: usize, r: usize) -> Result<ProtocolInstance> {
    let inst = three_config_knowledge_with(n, r, false)?;
    Ok(inst.renamed(format!("mutant-knowledge-no-prepend(n={n},r={r})")))
}

/// Parameters accepted by [`build`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Params {
    pub n: usize,
    pub r: usize,
    pub ell: u32,
    /// Start configuration names, comma separated; one name applies to every room.
    pub start: Option<String>,
}

impl Params {
    pub fn new(n: usize, r: usize) -> Params {
        Params { n, r, ell: 1, start: None }
    }
}

pub const PROTOCOL_IDS: &[&str] = &[
    "one-room-known",
    "one-room-unknown",
    "one-room-known-per-room",
    "one-room-unknown-per-room",
    "at-least-one-room",
    "sequential-chain",
    "room-at-a-time-six",
    "two-switch-prisoner",
    "two-switch-room",
    "arbitrary-start",
    "knowledge-3config",
    "prob1-3config",
    "two-config-prob-eps",
    "two-rooms-3config",
    "multi-declare",
    "repeated-entries",
    "forced-flip[:base]",
    "mutant-two-switch-count",
    "mutant-prob1-no-see",
    "mutant-knowledge-no-prepend",
];

fn parse_start(spec: &str, names: &[&str], r: usize) -> Result<Vec<Config>> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let lookup = |s: &str| {
        names
            .iter()
            .position(|n| *n == s)
            .map(|i| Config(i as u8))
            .ok_or_else(|| Error::Unknown(format!("configuration name {s:?}")))
    };
    match parts.len() {
        1 => Ok(vec![lookup(parts[0])?; r]),
        k if k == r => parts.into_iter().map(lookup).collect(),
        k => Err(Error::Unsupported(format!("start lists {k} rooms, expected {r}"))),
    }
}

fn single_start(params: &Params, names: &[&str]) -> Result<Config> {
    match &params.start {
        None => Ok(Config(0)),
        Some(s) => {
            let v = parse_start(s, names, 1)?;
            Ok(v[0])
        }
    }
}

fn reject_start(id: &str, params: &Params) -> Result<()> {
    match params.start {
        Some(_) => Err(Error::Unsupported(format!("{id} takes no --start"))),
        None => Ok(()),
    }
}

/// Resolve a registry identifier against parameters.
pub fn build(id: &str, params: &Params) -> Result<ProtocolInstance> {
    let Params { n, r, ell, .. } = *params;
    if let Some(rest) = id.strip_prefix("forced-flip") {
        let base_id = match rest {
            "" => "two-switch-prisoner",
            s => s.strip_prefix(':').ok_or_else(|| Error::Unknown(id.to_string()))?,
        };
        if base_id.starts_with("forced-flip") {
            return Err(Error::Unsupported("forced-flip cannot be nested".into()));
        }
        return forced_flip_transform(&build(base_id, params)?);
    }
    if id != "arbitrary-start" && id != "one-room-unknown" && id != "one-room-unknown-per-room" {
        reject_start(id, params)?;
    }
    if id != "repeated-entries" && ell != 1 && ell != 0 {
        return Err(Error::Unsupported(format!("{id} takes no --ell")));
    }
    let one_room = |label: &str| need(r == 1, format!("{label} is a one-room protocol; use --r 1"));
    match id {
        "one-room-known" => {
            one_room(id)?;
            one_room_known(n)
        }
        "one-room-unknown" => {
            one_room(id)?;
            one_room_unknown(n, single_start(params, &["OFF", "ON"])?)
        }
        "one-room-known-per-room" => one_room_known_per_room(n, r),
        "one-room-unknown-per-room" => one_room_unknown_per_room(n, r, single_start(params, &["OFF", "ON"])?),
        "at-least-one-room" => at_least_one_room(n, r),
        "sequential-chain" => sequential_chain(n, r),
        "room-at-a-time-six" => room_at_a_time_six(n, r),
        "two-switch-prisoner" => two_switch_prisoner(n, r),
        "two-switch-room" => two_switch_room(n, r),
        "arbitrary-start" => {
            let base = two_switch_prisoner(n, r)?;
            let names: Vec<&str> = base.config_names.iter().map(String::as_str).collect();
            let start = match &params.start {
                Some(s) => parse_start(s, &names, r)?,
                None => base.start.clone(),
            };
            arbitrary_start_wrapper(&base, &start)
        }
        "knowledge-3config" => three_config_knowledge(n, r),
        "prob1-3config" => three_config_prob1(n, r),
        "two-config-prob-eps" => two_config_prob_eps(n, r),
        "two-rooms-3config" => {
            need(r == 2, "two-rooms-3config needs --r 2")?;
            two_rooms_three_configs(n)
        }
        "multi-declare" => with_multiple_declarations(&two_switch_room(n, r)?),
        "repeated-entries" => with_repeated_entries(&two_switch_prisoner(n, r)?, ell.max(1)),
        "mutant-two-switch-count" => mutant_two_switch_count(n, r),
        "mutant-prob1-no-see" => mutant_prob1_no_see(n, r),
        "mutant-knowledge-no-prepend" => mutant_knowledge_no_prepend(n, r),
        other => Err(Error::Unknown(format!("protocol {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repeat_counts(p: &Program) -> Vec<u32> {
        fn walk(i: &Instruction, out: &mut Vec<u32>) {
            if let Instruction::Repeat { count, body } = i {
                out.push(*count);
                body.iter().for_each(|b| walk(b, out));
            }
        }
        let mut out = Vec::new();
        p.instructions().iter().for_each(|i| walk(i, &mut out));
        out
    }

    #[test]
    fn one_room_leader_counts_n_minus_one() {
        let inst = one_room_known(5).unwrap();
        assert_eq!(repeat_counts(&inst.programs[0]), vec![4]);
    }

    #[test]
    fn single_prisoner_sees_off_then_declares() {
        let inst = one_room_known(1).unwrap();
        assert_eq!(inst.programs[0].instructions(), &[see(OFF), Instruction::Declare]);
    }

    #[test]
    fn unknown_start_counts_twice() {
        let inst = one_room_unknown(3, Config(ON)).unwrap();
        assert_eq!(repeat_counts(&inst.programs[0]), vec![4]);
        assert_eq!(repeat_counts(&inst.programs[1]), vec![2]);
    }

    #[test]
    fn at_least_one_room_counts() {
        let inst = at_least_one_room(3, 2).unwrap();
        assert_eq!(repeat_counts(&inst.programs[0]), vec![6]);
        assert_eq!(repeat_counts(&inst.programs[1]), vec![3]);
        let inst = at_least_one_room(2, 1).unwrap();
        assert_eq!(repeat_counts(&inst.programs[0]), vec![2]);
        assert_eq!(repeat_counts(&inst.programs[1]), vec![2]);
    }

    #[test]
    fn sequential_chain_shape() {
        let inst = sequential_chain(2, 3).unwrap();
        assert_eq!(inst.m, 3);
        assert_eq!(inst.programs[0].instructions(), &[repeat(3, vec![flip(0, 1)])]);
        assert_eq!(inst.programs[1].instructions(), &[repeat(3, vec![flip(1, 2)]), Instruction::Declare]);
        let solo = sequential_chain(1, 4).unwrap();
        assert_eq!(solo.programs[0].instructions(), &[repeat(4, vec![flip(0, 1)]), Instruction::Declare]);
    }

    #[test]
    fn six_config_inner_counts() {
        let inst = room_at_a_time_six(2, 1).unwrap();
        assert_eq!(repeat_counts(&inst.programs[0]), vec![1, 1, 1]);
    }

    #[test]
    fn two_switch_prisoner_leader_length() {
        let inst = two_switch_prisoner(3, 2).unwrap();
        let ops = inst.programs[0].steps();
        assert_eq!(ops.len(), 2 + 2 + 1 + 3 + 1);
        assert_eq!(ops.last().unwrap().op, Op::Declare);
        assert!(satisfies_reduction_hypothesis(&inst));
    }

    #[test]
    fn two_switch_room_transition_counts() {
        let inst = two_switch_room(2, 5).unwrap();
        let counts: Vec<u32> = inst.programs[0]
            .instructions()
            .iter()
            .zip(inst.programs[0].regions())
            .filter(|(_, reg)| matches!(reg.as_deref(), Some("to-one") | Some("to-zero")))
            .map(|(i, _)| match i {
                Instruction::Repeat { count, .. } => *count,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(counts, vec![4, 3, 2, 1]);
        assert!(matches!(two_switch_room(2, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn wrapper_counts_for_all_zero_start() {
        let base = two_switch_prisoner(3, 2).unwrap();
        let w = arbitrary_start_wrapper(&base, &base.start).unwrap();
        let leader = repeat_counts(&w.programs[0]);
        assert_eq!(&leader[..2], &[0, 2 * (2 + 1)]);
        assert_eq!(repeat_counts(&w.programs[1])[0], 3);
    }

    #[test]
    fn wrapper_rejects_active_non_leaders() {
        let base = one_room_known_per_room(2, 2).unwrap();
        assert!(matches!(arbitrary_start_wrapper(&base, &base.start), Err(Error::Construction(_))));
    }

    #[test]
    fn knowledge_has_no_declare() {
        for (n, r) in [(1, 1), (2, 2), (4, 3)] {
            let inst = three_config_knowledge(n, r).unwrap();
            assert!(inst.programs.iter().all(|p| !p.contains_declare()));
        }
    }

    #[test]
    fn prob1_middle_prisoner_shape() {
        let inst = three_config_prob1(3, 2).unwrap();
        let mid = &inst.programs[1];
        assert_eq!(repeat_counts(mid), vec![1, 4, 4, 4, 1]);
        assert!(mid
            .instructions()
            .contains(&Instruction::Oscillate { first: Config(1), second: Config(0), k: 1 }));
        assert!(inst.programs[2].contains_declare());
    }

    #[test]
    fn prob_eps_counts() {
        let inst = two_config_prob_eps(2, 2).unwrap();
        assert_eq!(repeat_counts(&inst.programs[0]), vec![2, 2, 2, 3]);
        assert_eq!(repeat_counts(&inst.programs[1]), vec![3, 2, 2]);
        assert!(inst.programs[1].contains_declare());
    }

    #[test]
    fn two_rooms_leader_listing() {
        let inst = two_rooms_three_configs(2).unwrap();
        assert_eq!(
            inst.programs[0].instructions(),
            &[flip(0, 2), repeat(1, vec![flip(1, 0)]), Instruction::Declare]
        );
    }

    #[test]
    fn multi_declare_appends() {
        let base = two_switch_room(2, 3).unwrap();
        let md = with_multiple_declarations(&base).unwrap();
        assert_eq!(md.programs[0].instructions().len(), base.programs[0].instructions().len() + 1);
        assert_eq!(md.programs[1].instructions().len(), base.programs[1].instructions().len() + 2);
        assert!(with_multiple_declarations(&two_switch_prisoner(2, 3).unwrap()).is_err());
    }

    #[test]
    fn repeated_entries_scale_tour() {
        let base = two_switch_prisoner(2, 2).unwrap();
        let one = with_repeated_entries(&base, 1).unwrap();
        assert_eq!(one.programs, base.programs);
        let two = with_repeated_entries(&base, 2).unwrap();
        assert_eq!(two.programs[0].steps().len(), base.programs[0].steps().len() + 4);
        assert_eq!(two.win, WinCondition::AllRoomsAllPrisoners { min_visits: 2 });
    }

    #[test]
    fn forced_flip_doubles_and_always_changes() {
        let base = two_switch_prisoner(2, 2).unwrap();
        let ff = forced_flip_transform(&base).unwrap();
        assert_eq!(ff.m, 8);
        for c in 0..8u8 {
            for pc in 0..=base.programs[1].steps().len() as u32 {
                let s = PrisonerState { pc, ..Default::default() };
                let (_, out) = ff.visit(1, s, Config(c));
                assert_ne!(out.new_config, Config(c));
            }
        }
        assert!(forced_flip_transform(&ff).is_err());
    }

    #[test]
    fn registry_resolves_every_id() {
        for id in PROTOCOL_IDS {
            let id = id.trim_end_matches("[:base]");
            let p = match id {
                "one-room-known" | "one-room-unknown" => Params::new(2, 1),
                "two-switch-room" | "multi-declare" => Params::new(2, 3),
                _ => Params::new(2, 2),
            };
            build(id, &p).unwrap_or_else(|e| panic!("{id}: {e}"));
        }
        assert!(matches!(build("nope", &Params::new(2, 2)), Err(Error::Unknown(_))));
    }

    #[test]
    fn registry_parses_start_names() {
        let p = Params { start: Some("NEXT,READY".into()), ..Params::new(2, 2) };
        let inst = build("arbitrary-start", &p).unwrap();
        assert_eq!(inst.start, vec![Config(2), Config(3)]);
        let p = Params { start: Some("ON".into()), ..Params::new(2, 1) };
        assert_eq!(build("one-room-unknown", &p).unwrap().start, vec![Config(ON)]);
    }
}
