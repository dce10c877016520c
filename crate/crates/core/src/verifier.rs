//! Simulation runs and exhaustive joint-state exploration.
//!
//! The explorer performs a breadth-first closure over every warden choice
//! (`n * r` successors per state) and derives four verdicts from the
//! resulting graph:
//!
//! * `safe`: no reachable incorrect declaration;
//! * `prob_eps`: safe, and some correct declaration is reachable;
//! * `prob1`: safe, and every reachable non-terminal state can still reach
//!   a correct declaration;
//! * `live`: no fair infinite run avoids the goal. A fair run eventually
//!   stays inside one strongly connected component and takes every
//!   (prisoner, room) pair infinitely often, so a fair non-declaring run
//!   exists iff some SCC of the non-terminal subgraph has internal edges
//!   covering all pairs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::ProtocolInstance;
use crate::monitors::Monitor;
use crate::ownership::OwnState;
use crate::protocol::{Config, PrisonerState};
use crate::scheduling::Scheduler;
use crate::world::{Declaration, StepRecord, VisitEvent, WinCondition, WorldState};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;
pub const NODE_CAP_ENV: &str = "LOCKSTEP_NODE_CAP";

/// Node cap from `LOCKSTEP_NODE_CAP`, else the default.
pub fn default_node_cap() -> usize {
    std::env::var(NODE_CAP_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_NODE_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    DeclaredCorrect { step: u64 },
    DeclaredIncorrect { step: u64, prisoner: usize },
    StepLimit { step: u64 },
}

impl Outcome {
    pub fn step(&self) -> u64 {
        match *self {
            Outcome::DeclaredCorrect { step }
            | Outcome::DeclaredIncorrect { step, .. }
            | Outcome::StepLimit { step } => step,
        }
    }

    pub fn is_correct(&self) -> bool {
        matches!(self, Outcome::DeclaredCorrect { .. })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::DeclaredCorrect { step } => write!(f, "declared correctly at step {step}"),
            Outcome::DeclaredIncorrect { step, prisoner } => {
                write!(f, "p{prisoner} declared incorrectly at step {step}")
            }
            Outcome::StepLimit { step } => write!(f, "no declaration within {step} steps"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub trace: Vec<StepRecord>,
    pub world: WorldState,
}

/// Drive `scheduler` against `instance` until a declaration decides the
/// run or `max_steps` visits have happened. Steps are 1-indexed.
pub fn run(instance: &ProtocolInstance, scheduler: &mut dyn Scheduler, win: WinCondition, max_steps: u64) -> RunResult {
    let mut world = WorldState::initial(instance, win.visit_cap());
    let mut trace = Vec::new();
    for step in 1..=max_steps {
        let event = scheduler.next(&world);
        let (record, verdict) = world.apply(instance, event, win, step);
        scheduler.observe(&record, &world);
        trace.push(record);
        match verdict {
            Declaration::Incorrect => {
                let outcome = Outcome::DeclaredIncorrect { step, prisoner: event.prisoner };
                return RunResult { outcome, trace, world };
            }
            Declaration::Correct if win != WinCondition::AllMustDeclare || world.all_declared() => {
                return RunResult { outcome: Outcome::DeclaredCorrect { step }, trace, world };
            }
            _ => {}
        }
    }
    RunResult { outcome: Outcome::StepLimit { step: max_steps }, trace, world }
}

/// One trace line with configuration names resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub step: u64,
    pub prisoner: usize,
    pub room: usize,
    pub config_before: String,
    pub config_after: String,
    pub fired: bool,
    pub declared: bool,
}

impl TraceLine {
    pub fn from_record(instance: &ProtocolInstance, r: &StepRecord) -> TraceLine {
        TraceLine {
            step: r.step,
            prisoner: r.prisoner,
            room: r.room,
            config_before: instance.name_of(r.config_before).to_string(),
            config_after: instance.name_of(r.config_after).to_string(),
            fired: r.fired,
            declared: r.declared,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace lines serialize")
    }

    pub fn parse_json(line: &str) -> Result<TraceLine> {
        serde_json::from_str(line).map_err(|e| Error::Unknown(format!("trace line: {e}")))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>6}  p{} -> room {}  {} -> {}",
            self.step, self.prisoner, self.room, self.config_before, self.config_after
        );
        if self.fired {
            s.push_str("  fired");
        }
        if self.declared {
            s.push_str("  DECLARE");
        }
        s
    }
}

/// What counts as reaching the goal during exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    /// A correct declaration (every prisoner's, under `AllMustDeclare`).
    Declaration,
    /// Every prisoner's cursor is past its last instruction.
    AllCursorsTerminal,
}

pub struct ExploreOptions {
    pub win: WinCondition,
    pub goal: Goal,
    pub node_cap: usize,
    /// Quotient by room permutations; disables the liveness verdict.
    pub symmetry: bool,
    /// Track provable ownership inside the state.
    pub ownership: bool,
    pub monitors: Vec<Box<dyn Monitor>>,
}

impl ExploreOptions {
    pub fn for_instance(instance: &ProtocolInstance) -> ExploreOptions {
        ExploreOptions {
            win: instance.win,
            goal: Goal::Declaration,
            node_cap: default_node_cap(),
            symmetry: false,
            ownership: false,
            monitors: Vec::new(),
        }
    }

    pub fn with_monitors(mut self, monitors: Vec<Box<dyn Monitor>>) -> Self {
        self.ownership |= monitors.iter().any(|m| m.needs_ownership());
        self.monitors = monitors;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CounterexampleKind {
    IncorrectDeclaration,
    /// A fair cycle that never reaches the goal; the trace leads into it.
    FairCycle { scc_size: usize },
    /// A reachable state from which the goal is unreachable.
    Stuck,
    Monitor(String),
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub kind: CounterexampleKind,
    pub message: String,
    pub trace: Vec<StepRecord>,
}

#[derive(Clone, Debug)]
pub struct MonitorResult {
    pub id: String,
    pub passed: bool,
    pub checks: u64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug)]
pub struct ExploreReport {
    pub protocol: String,
    pub n: usize,
    pub r: usize,
    pub states: usize,
    pub edges: usize,
    pub max_depth: u32,
    pub safe: bool,
    /// `None` under symmetry reduction.
    pub live: Option<bool>,
    pub prob1: bool,
    pub prob_eps: bool,
    pub goal_states: usize,
    pub unsafe_trace: Option<Counterexample>,
    pub liveness_trace: Option<Counterexample>,
    pub stuck_trace: Option<Counterexample>,
    pub monitors: Vec<MonitorResult>,
}

impl ExploreReport {
    pub fn monitors_pass(&self) -> bool {
        self.monitors.iter().all(|m| m.passed)
    }

    pub fn monitor(&self, id: &str) -> Option<&MonitorResult> {
        self.monitors.iter().find(|m| m.id == id)
    }

    /// One machine-readable record per property.
    pub fn report_lines(&self) -> Vec<String> {
        let fmt_opt = |v: Option<bool>| v.map_or("n/a".to_string(), |b| b.to_string());
        let mut props = vec![
            ("safe", self.safe.to_string()),
            ("live", fmt_opt(self.live)),
            ("prob1", self.prob1.to_string()),
            ("prob_eps", self.prob_eps.to_string()),
        ];
        for m in &self.monitors {
            props.push((m.id.as_str(), m.passed.to_string()));
        }
        props
            .into_iter()
            .map(|(p, v)| {
                format!(
                    "protocol={} n={} r={} property={} verdict={} states_explored={} max_depth={}",
                    self.protocol, self.n, self.r, p, v, self.states, self.max_depth
                )
            })
            .collect()
    }
}

const EMPTY: u32 = u32::MAX;
const NORMAL: u8 = 0;
const GOAL: u8 = 1;
const BAD: u8 = 2;

/// Fixed-width byte encoding of explorer nodes.
struct Codec {
    n: usize,
    r: usize,
    m: usize,
    own: bool,
    width: usize,
}

impl Codec {
    fn new(n: usize, r: usize, m: usize, own: bool) -> Codec {
        let width = r + 4 * n + n * r + if own { n * m + n } else { 0 };
        Codec { n, r, m, own, width }
    }

    fn encode(&self, w: &WorldState, own: Option<&OwnState>, out: &mut Vec<u8>) {
        out.clear();
        out.extend(w.rooms.iter().map(|c| c.0));
        for (p, s) in w.prisoners.iter().enumerate() {
            out.extend((s.pc as u16).to_le_bytes());
            out.push(s.net as i8 as u8);
            out.push(u8::from(s.declared) | (u8::from(w.declared[p]) << 1));
        }
        out.extend(w.visits.iter().map(|&v| v as u8));
        if let Some(o) = own {
            out.extend(o.owns.iter().map(|&b| u8::from(b)));
            out.extend(o.ever_all.iter().map(|&b| u8::from(b)));
        }
    }

    fn decode(&self, bytes: &[u8], cap: u32) -> (WorldState, Option<OwnState>) {
        let (n, r) = (self.n, self.r);
        let rooms = bytes[..r].iter().map(|&b| Config(b)).collect();
        let mut prisoners = Vec::with_capacity(n);
        let mut declared = Vec::with_capacity(n);
        for p in 0..n {
            let b = &bytes[r + 4 * p..r + 4 * p + 4];
            prisoners.push(PrisonerState {
                pc: u16::from_le_bytes([b[0], b[1]]) as u32,
                net: b[2] as i8 as i32,
                declared: b[3] & 1 != 0,
            });
            declared.push(b[3] & 2 != 0);
        }
        let off = r + 4 * n;
        let visits = bytes[off..off + n * r].iter().map(|&v| v as u32).collect();
        let own = self.own.then(|| {
            let off = off + n * r;
            OwnState {
                owns: bytes[off..off + n * self.m].iter().map(|&b| b != 0).collect(),
                ever_all: bytes[off + n * self.m..off + n * self.m + n].iter().map(|&b| b != 0).collect(),
            }
        });
        (WorldState { rooms, prisoners, visits, declared, cap }, own)
    }
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ (h >> 29)
}

/// Arena of fixed-width keys with open-addressing dedup.
struct StateStore {
    width: usize,
    arena: Vec<u8>,
    slots: Vec<u32>,
    len: usize,
}

impl StateStore {
    fn new(width: usize) -> StateStore {
        StateStore { width, arena: Vec::new(), slots: vec![EMPTY; 1 << 12], len: 0 }
    }

    fn key(&self, id: usize) -> &[u8] {
        &self.arena[id * self.width..(id + 1) * self.width]
    }

    fn grow(&mut self) {
        let mut slots = vec![EMPTY; self.slots.len() * 2];
        let mask = slots.len() - 1;
        for id in 0..self.len {
            let mut i = fnv(self.key(id)) as usize & mask;
            while slots[i] != EMPTY {
                i = (i + 1) & mask;
            }
            slots[i] = id as u32;
        }
        self.slots = slots;
    }

    /// Returns the id and whether the key was new.
    fn insert(&mut self, key: &[u8]) -> (usize, bool) {
        if self.len * 2 >= self.slots.len() {
            self.grow();
        }
        let mask = self.slots.len() - 1;
        let mut i = fnv(key) as usize & mask;
        loop {
            let s = self.slots[i];
            if s == EMPTY {
                let id = self.len;
                self.slots[i] = id as u32;
                self.arena.extend_from_slice(key);
                self.len += 1;
                return (id, true);
            }
            if self.key(s as usize) == key {
                return (s as usize, false);
            }
            i = (i + 1) & mask;
        }
    }
}

/// Sort rooms by (config, visit column); returns `perm` with
/// `canonical[i] = original[perm[i]]`.
fn canonicalize(w: &mut WorldState) -> Vec<usize> {
    let (n, r) = (w.prisoners.len(), w.rooms.len());
    let column = |w: &WorldState, room: usize| -> Vec<u32> { (0..n).map(|p| w.visits[p * r + room]).collect() };
    let mut perm: Vec<usize> = (0..r).collect();
    perm.sort_by(|&a, &b| (w.rooms[a], column(w, a)).cmp(&(w.rooms[b], column(w, b))));
    let rooms = perm.iter().map(|&i| w.rooms[i]).collect();
    let mut visits = vec![0; n * r];
    for p in 0..n {
        for (i, &src) in perm.iter().enumerate() {
            visits[p * r + i] = w.visits[p * r + src];
        }
    }
    w.rooms = rooms;
    w.visits = visits;
    perm
}

struct Explorer<'a> {
    inst: &'a ProtocolInstance,
    opts: ExploreOptions,
    codec: Codec,
    store: StateStore,
    cap: u32,
    parent: Vec<u32>,
    parent_event: Vec<u16>,
    depth: Vec<u32>,
    kind: Vec<u8>,
    succ: Vec<u32>,
    first_bad: Option<usize>,
    monitor_hits: Vec<Option<(usize, Option<VisitEvent>, String)>>,
    monitor_checks: Vec<u64>,
}

impl<'a> Explorer<'a> {
    fn classify(&self, w: &WorldState, decl: Declaration) -> u8 {
        match decl {
            Declaration::Incorrect => BAD,
            Declaration::Correct if self.opts.win != WinCondition::AllMustDeclare || w.all_declared() => GOAL,
            _ => match self.opts.goal {
                Goal::AllCursorsTerminal
                    if (0..self.inst.n).all(|p| self.inst.is_terminal(p, &w.prisoners[p])) =>
                {
                    GOAL
                }
                _ => NORMAL,
            },
        }
    }

    fn add(&mut self, mut w: WorldState, own: Option<OwnState>, kind: u8, from: Option<(usize, VisitEvent)>) -> Result<usize> {
        if self.opts.symmetry {
            canonicalize(&mut w);
        }
        let mut key = Vec::with_capacity(self.codec.width);
        self.codec.encode(&w, own.as_ref(), &mut key);
        let (id, fresh) = self.store.insert(&key);
        if !fresh {
            return Ok(id);
        }
        if self.store.len > self.opts.node_cap {
            return Err(Error::ResourceLimit(format!(
                "{}: more than {} states (raise --node-cap or {NODE_CAP_ENV})",
                self.inst.id, self.opts.node_cap
            )));
        }
        let (p, ev, d) = match from {
            Some((p, e)) => (p as u32, (e.prisoner * self.inst.r + e.room) as u16, self.depth[p] + 1),
            None => (EMPTY, 0, 0),
        };
        self.parent.push(p);
        self.parent_event.push(ev);
        self.depth.push(d);
        self.kind.push(kind);
        if kind == BAD && self.first_bad.is_none() {
            self.first_bad = Some(id);
        }
        for (i, m) in self.opts.monitors.iter_mut().enumerate() {
            self.monitor_checks[i] += 1;
            if self.monitor_hits[i].is_none() {
                if let Some(msg) = m.check_state(self.inst, &w, own.as_ref()) {
                    self.monitor_hits[i] = Some((id, None, msg));
                }
            }
        }
        Ok(id)
    }

    fn explore(&mut self) -> Result<()> {
        let (n, r) = (self.inst.n, self.inst.r);
        let w0 = WorldState::initial(self.inst, self.cap);
        let own0 = self.opts.ownership.then(|| OwnState::initial(self.inst, &w0));
        let k0 = self.classify(&w0, Declaration::None);
        self.add(w0, own0, k0, None)?;
        let mut key = Vec::new();
        let mut next = 0usize;
        while next < self.store.len {
            let id = next;
            next += 1;
            self.succ.resize((id + 1) * n * r, EMPTY);
            if self.kind[id] != NORMAL {
                continue;
            }
            key.clear();
            key.extend_from_slice(self.store.key(id));
            let (w, own) = self.codec.decode(&key, self.cap);
            for prisoner in 0..n {
                for room in 0..r {
                    let event = VisitEvent { prisoner, room };
                    let mut to = w.clone();
                    let (record, decl) = to.apply(self.inst, event, self.opts.win, 0);
                    let own_to = own.as_ref().map(|o| o.after(self.inst, &w, &record));
                    for (i, m) in self.opts.monitors.iter_mut().enumerate() {
                        if self.monitor_hits[i].is_none() {
                            if let Some(msg) = m.check_edge(self.inst, &w, &record, &to, own_to.as_ref()) {
                                self.monitor_hits[i] = Some((id, Some(event), msg));
                            }
                        }
                    }
                    let kind = self.classify(&to, decl);
                    let t = self.add(to, own_to, kind, Some((id, event)))?;
                    self.succ[id * n * r + prisoner * r + room] = t as u32;
                }
            }
        }
        Ok(())
    }

    /// Canonical event path from the root to `id`, with an optional extra event.
    fn path(&self, id: usize, extra: Option<VisitEvent>) -> Vec<VisitEvent> {
        let r = self.inst.r;
        let mut events = Vec::new();
        let mut at = id;
        while self.parent[at] != EMPTY {
            let e = self.parent_event[at] as usize;
            events.push(VisitEvent { prisoner: e / r, room: e % r });
            at = self.parent[at] as usize;
        }
        events.reverse();
        events.extend(extra);
        events
    }

    /// Replay canonical events on concrete states.
    fn trace(&self, events: &[VisitEvent]) -> Vec<StepRecord> {
        let mut w = WorldState::initial(self.inst, self.cap);
        let mut out = Vec::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            let room = if self.opts.symmetry {
                let mut c = w.clone();
                canonicalize(&mut c)[e.room]
            } else {
                e.room
            };
            let ev = VisitEvent { prisoner: e.prisoner, room };
            let (rec, _) = w.apply(self.inst, ev, self.opts.win, i as u64 + 1);
            out.push(rec);
        }
        out
    }

    fn counterexample(&self, kind: CounterexampleKind, id: usize, extra: Option<VisitEvent>, message: String) -> Counterexample {
        Counterexample { kind, message, trace: self.trace(&self.path(id, extra)) }
    }
}

/// Iterative Tarjan over nodes where `keep` holds; returns component ids.
fn tarjan(count: usize, succ: impl Fn(usize) -> Vec<usize>, keep: impl Fn(usize) -> bool) -> (Vec<u32>, usize) {
    let mut index = vec![EMPTY; count];
    let mut low = vec![0u32; count];
    let mut on_stack = vec![false; count];
    let mut comp = vec![EMPTY; count];
    let mut stack = Vec::new();
    let mut next_index = 0u32;
    let mut comps = 0usize;
    for root in 0..count {
        if !keep(root) || index[root] != EMPTY {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, children, pos)) = call.last_mut() {
            let v = *v;
            if *pos < children.len() {
                let w = children[*pos];
                *pos += 1;
                if !keep(w) {
                    continue;
                }
                if index[w] == EMPTY {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let ch = succ(w);
                    call.push((w, ch, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((u, _, _)) = call.last() {
                    low[*u] = low[*u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = comps as u32;
                        if w == v {
                            break;
                        }
                    }
                    comps += 1;
                }
            }
        }
    }
    (comp, comps)
}

/// Exhaustively explore `instance` under `opts`.
pub fn explore(instance: &ProtocolInstance, opts: ExploreOptions) -> Result<ExploreReport> {
    if opts.ownership && instance.forced_flip {
        return Err(Error::Unsupported("ownership tracking on forced-flip instances".into()));
    }
    let max_pc = instance.programs.iter().map(|p| p.steps().len()).max().unwrap_or(0);
    if max_pc >= u16::MAX as usize || instance.n * instance.r >= u16::MAX as usize {
        return Err(Error::ResourceLimit("program or instance too large for the explorer".into()));
    }
    let cap = opts.win.visit_cap();
    if cap > u8::MAX as u32 {
        return Err(Error::Unsupported("visit threshold above 255".into()));
    }
    let codec = Codec::new(instance.n, instance.r, instance.m, opts.ownership);
    let monitors = opts.monitors.len();
    let mut ex = Explorer {
        inst: instance,
        store: StateStore::new(codec.width),
        codec,
        cap,
        opts,
        parent: Vec::new(),
        parent_event: Vec::new(),
        depth: Vec::new(),
        kind: Vec::new(),
        succ: Vec::new(),
        first_bad: None,
        monitor_hits: vec![None; monitors],
        monitor_checks: vec![0; monitors],
    };
    ex.explore()?;

    let (n, r) = (instance.n, instance.r);
    let nr = n * r;
    let count = ex.store.len;
    let is_normal = |v: usize| ex.kind[v] == NORMAL;
    let succ_of = |v: usize| -> Vec<usize> {
        if ex.kind[v] != NORMAL {
            return Vec::new();
        }
        ex.succ[v * nr..(v + 1) * nr].iter().map(|&t| t as usize).collect()
    };

    let safe = ex.first_bad.is_none();
    let goal_states = ex.kind.iter().filter(|&&k| k == GOAL).count();

    // Backward reachability from goal states.
    let mut rev: Vec<Vec<u32>> = vec![Vec::new(); count];
    for v in 0..count {
        if is_normal(v) {
            for t in succ_of(v) {
                rev[t].push(v as u32);
            }
        }
    }
    let mut reaches = vec![false; count];
    let mut queue: Vec<usize> = (0..count).filter(|&v| ex.kind[v] == GOAL).collect();
    for &g in &queue {
        reaches[g] = true;
    }
    while let Some(v) = queue.pop() {
        for &p in &rev[v] {
            let p = p as usize;
            if !reaches[p] {
                reaches[p] = true;
                queue.push(p);
            }
        }
    }
    let stuck = (0..count).find(|&v| is_normal(v) && !reaches[v]);
    let prob1 = safe && stuck.is_none();
    let prob_eps = safe && goal_states > 0;

    let mut live = None;
    let mut liveness_trace = None;
    if !ex.opts.symmetry {
        let (comp, comps) = tarjan(count, succ_of, is_normal);
        let mut cover = vec![vec![false; nr]; comps];
        let mut size = vec![0usize; comps];
        for v in 0..count {
            if !is_normal(v) {
                continue;
            }
            size[comp[v] as usize] += 1;
            for (label, &t) in ex.succ[v * nr..(v + 1) * nr].iter().enumerate() {
                let t = t as usize;
                if is_normal(t) && comp[t] == comp[v] {
                    cover[comp[v] as usize][label] = true;
                }
            }
        }
        let trap = (0..comps).find(|&c| cover[c].iter().all(|&b| b));
        live = Some(trap.is_none());
        if let Some(c) = trap {
            let entry = (0..count).filter(|&v| is_normal(v) && comp[v] as usize == c).min_by_key(|&v| ex.depth[v]);
            let entry = entry.expect("non-empty component");
            liveness_trace = Some(ex.counterexample(
                CounterexampleKind::FairCycle { scc_size: size[c] },
                entry,
                None,
                format!("fair cycle through {} states never reaches the goal", size[c]),
            ));
        }
    }

    let unsafe_trace = ex.first_bad.map(|b| {
        ex.counterexample(CounterexampleKind::IncorrectDeclaration, b, None, "incorrect declaration".into())
    });
    let stuck_trace = stuck.map(|s| ex.counterexample(CounterexampleKind::Stuck, s, None, "goal unreachable".into()));

    let mut monitor_results = Vec::with_capacity(monitors);
    for (i, m) in ex.opts.monitors.iter().enumerate() {
        let counterexample = ex.monitor_hits[i].as_ref().map(|(id, extra, msg)| {
            ex.counterexample(CounterexampleKind::Monitor(m.id().to_string()), *id, *extra, msg.clone())
        });
        monitor_results.push(MonitorResult {
            id: m.id().to_string(),
            passed: counterexample.is_none(),
            checks: ex.monitor_checks[i],
            counterexample,
        });
    }

    Ok(ExploreReport {
        protocol: instance.id.clone(),
        n,
        r,
        states: count,
        edges: (0..count).filter(|&v| is_normal(v)).count() * nr,
        max_depth: ex.depth.iter().copied().max().unwrap_or(0),
        safe,
        live,
        prob1,
        prob_eps,
        goal_states,
        unsafe_trace,
        liveness_trace,
        stuck_trace,
        monitors: monitor_results,
    })
}

/// Whether the claimed guarantee matches the derived verdicts.
pub fn guarantee_holds(instance: &ProtocolInstance, report: &ExploreReport) -> bool {
    use crate::library::Guarantee::*;
    match instance.guarantee {
        Winning => report.safe && report.live.unwrap_or(true),
        Prob1 => report.prob1,
        ProbEps => report.prob_eps,
        KnowledgeOnly | Unclaimed => true,
    }
}

#[derive(Clone, Debug)]
pub struct KnowledgeReport {
    pub states: usize,
    /// Terminal cursor implies a full visit row, on every reachable state.
    pub sound: bool,
    /// Every fair run brings every cursor to its end.
    pub eventual: bool,
    pub counterexample: Option<Counterexample>,
}

impl KnowledgeReport {
    pub fn passed(&self) -> bool {
        self.sound && self.eventual
    }
}

/// Soundness and eventual knowledge for a declaration-free protocol.
pub fn check_knowledge(instance: &ProtocolInstance, node_cap: usize) -> Result<KnowledgeReport> {
    let opts = ExploreOptions {
        win: WinCondition::default(),
        goal: Goal::AllCursorsTerminal,
        node_cap,
        symmetry: false,
        ownership: false,
        monitors: vec![Box::new(crate::monitors::KnowledgeMonitor)],
    };
    let rep = explore(instance, opts)?;
    let monitor = &rep.monitors[0];
    let sound = monitor.passed;
    let eventual = rep.live.unwrap_or(false);
    let counterexample = monitor.counterexample.clone().or(rep.liveness_trace.clone());
    Ok(KnowledgeReport { states: rep.states, sound, eventual, counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{one_room_known, two_switch_prisoner};
    use crate::scheduling::{replay, round_robin};

    #[test]
    fn one_room_two_prisoners_declares_on_third_visit() {
        let inst = one_room_known(2).unwrap();
        let ev = |p| VisitEvent { prisoner: p, room: 0 };
        let mut s = replay(vec![ev(0), ev(1), ev(0)], 2, 1, "fixed");
        let res = run(&inst, &mut s, WinCondition::default(), 10);
        assert_eq!(res.outcome, Outcome::DeclaredCorrect { step: 3 });
        let res = run(&inst, &mut round_robin(2, 1), WinCondition::default(), 10);
        assert_eq!(res.outcome, Outcome::DeclaredCorrect { step: 3 });
    }

    #[test]
    fn single_step_without_declaration_hits_limit() {
        let inst = two_switch_prisoner(2, 2).unwrap();
        let res = run(&inst, &mut round_robin(2, 2), WinCondition::default(), 1);
        assert_eq!(res.outcome, Outcome::StepLimit { step: 1 });
        assert_eq!(res.trace.len(), 1);
    }

    #[test]
    fn store_dedups() {
        let mut s = StateStore::new(3);
        for i in 0..10_000u32 {
            let k = [(i % 7) as u8, (i % 11) as u8, (i % 13) as u8];
            s.insert(&k);
        }
        assert_eq!(s.len, 7 * 11 * 13);
    }

    #[test]
    fn tarjan_finds_cycles() {
        let succ = |v: usize| match v {
            0 => vec![1],
            1 => vec![2],
            2 => vec![0, 3],
            _ => vec![3],
        };
        let (comp, comps) = tarjan(4, succ, |_| true);
        assert_eq!(comps, 2);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[1], comp[2]);
        assert_ne!(comp[2], comp[3]);
    }

    #[test]
    fn one_room_is_safe_and_live() {
        let inst = one_room_known(3).unwrap();
        let rep = explore(&inst, ExploreOptions::for_instance(&inst)).unwrap();
        assert!(rep.safe && rep.live == Some(true) && rep.prob1 && rep.prob_eps);
    }

    #[test]
    fn node_cap_is_enforced() {
        let inst = two_switch_prisoner(2, 2).unwrap();
        let mut opts = ExploreOptions::for_instance(&inst);
        opts.node_cap = 10;
        assert!(matches!(explore(&inst, opts), Err(Error::ResourceLimit(_))));
    }
}
