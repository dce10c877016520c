//! The guarded-command language prisoners use to describe their strategies,
//! and the interpreter that executes one room visit at a time.
//!
//! A [`Program`] is authored as a tree of [`Instruction`]s (with `Repeat`
//! nodes carrying concrete counts) and expanded once into a flat list of
//! [`Step`]s. A prisoner's cursor is an index into that list, which is in
//! bijection with the usual "instruction path plus loop counters" cursor;
//! every step remembers its path and iteration counters for trace display
//! and for monitors that key off cursor regions.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A room's switch state, as an index into the instance's configuration set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Config(pub u8);

impl Config {
    pub const fn new(value: u8) -> Self {
        Config(value)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instruction {
    /// Wait for a room in `from`, then reconfigure it to `to`.
    Flip { from: Config, to: Config },
    /// Wait for a room in any configuration outside `excluded`, then set it to `to`.
    FlipNotIn { excluded: Vec<Config>, to: Config },
    /// Wait for a room in the given configuration, leaving it unchanged.
    See(Config),
    /// Toggle `first <-> second` until `first -> second` has fired `k` more
    /// times than `second -> first`.
    Oscillate { first: Config, second: Config, k: u32 },
    Declare,
    Repeat { count: u32, body: Vec<Instruction> },
}

pub fn flip(from: u8, to: u8) -> Instruction {
    Instruction::Flip { from: Config(from), to: Config(to) }
}

pub fn see(target: u8) -> Instruction {
    Instruction::See(Config(target))
}

pub fn repeat(count: u32, body: Vec<Instruction>) -> Instruction {
    Instruction::Repeat { count, body }
}

impl Instruction {
    fn configs(&self, out: &mut Vec<Config>) {
        match self {
            Instruction::Flip { from, to } => out.extend([*from, *to]),
            Instruction::FlipNotIn { excluded, to } => {
                out.extend(excluded.iter().copied());
                out.push(*to);
            }
            Instruction::See(c) => out.push(*c),
            Instruction::Oscillate { first, second, .. } => out.extend([*first, *second]),
            Instruction::Declare => {}
            Instruction::Repeat { body, .. } => body.iter().for_each(|i| i.configs(out)),
        }
    }

    fn contains_declare(&self) -> bool {
        match self {
            Instruction::Declare => true,
            Instruction::Repeat { body, .. } => body.iter().any(Instruction::contains_declare),
            _ => false,
        }
    }

    /// Number of guarded instructions and declarations after loop expansion.
    pub fn expanded_len(&self) -> usize {
        match self {
            Instruction::Repeat { count, body } => {
                *count as usize * body.iter().map(Instruction::expanded_len).sum::<usize>()
            }
            _ => 1,
        }
    }
}

/// One executable element of an expanded program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Flip { from: Config, to: Config },
    FlipNotIn { excluded: Vec<Config>, to: Config },
    See(Config),
    Oscillate { first: Config, second: Config, k: u32 },
    Declare,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub op: Op,
    /// Index path through the instruction tree.
    pub path: Vec<usize>,
    /// Zero-based iteration counter of every enclosing `Repeat`, outermost first.
    pub iterations: Vec<u32>,
}

impl Step {
    pub fn top(&self) -> usize {
        self.path[0]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    label: String,
    instructions: Vec<Instruction>,
    regions: Vec<Option<String>>,
    steps: Vec<Step>,
}

/// Incremental construction of a [`Program`] with optional region labels
/// attached to top-level instructions.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    label: String,
    instructions: Vec<Instruction>,
    regions: Vec<Option<String>>,
}

impl ProgramBuilder {
    pub fn new(label: impl Into<String>) -> Self {
        ProgramBuilder { label: label.into(), ..Default::default() }
    }

    pub fn push(mut self, instruction: Instruction) -> Self {
        self.instructions.push(instruction);
        self.regions.push(None);
        self
    }

    pub fn region(mut self, region: &str, instruction: Instruction) -> Self {
        self.instructions.push(instruction);
        self.regions.push(Some(region.to_string()));
        self
    }

    pub fn extend(mut self, instructions: impl IntoIterator<Item = Instruction>) -> Self {
        for i in instructions {
            self = self.push(i);
        }
        self
    }

    pub fn build(self) -> Result<Program> {
        Program::with_regions(self.label, self.instructions, self.regions)
    }
}

impl Program {
    pub fn new(label: impl Into<String>, instructions: Vec<Instruction>) -> Result<Program> {
        let regions = vec![None; instructions.len()];
        Program::with_regions(label, instructions, regions)
    }

    fn with_regions(
        label: impl Into<String>,
        instructions: Vec<Instruction>,
        regions: Vec<Option<String>>,
    ) -> Result<Program> {
        fn check(instr: &Instruction) -> Result<()> {
            match instr {
                Instruction::Repeat { body, .. } => {
                    if body.is_empty() {
                        return Err(Error::InvalidProgram("empty Repeat body".into()));
                    }
                    body.iter().try_for_each(check)
                }
                Instruction::Oscillate { first, second, k } => {
                    if first == second || *k == 0 {
                        return Err(Error::InvalidProgram(format!(
                            "Oscillate({first},{second},{k}) needs distinct configs and k >= 1"
                        )));
                    }
                    Ok(())
                }
                _ => Ok(()),
            }
        }
        instructions.iter().try_for_each(check)?;
        let mut steps = Vec::new();
        for (i, instr) in instructions.iter().enumerate() {
            expand(instr, &mut vec![i], &mut Vec::new(), &mut steps);
        }
        Ok(Program { label: label.into(), instructions, regions, steps })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn regions(&self) -> &[Option<String>] {
        &self.regions
    }

    /// A copy of this program with `prefix` prepended, each prefix
    /// instruction labeled with `region`.
    pub fn with_prefix(&self, prefix: Vec<Instruction>, region: &str) -> Result<Program> {
        let mut regions = vec![Some(region.to_string()); prefix.len()];
        regions.extend(self.regions.iter().cloned());
        let mut instructions = prefix;
        instructions.extend(self.instructions.iter().cloned());
        Program::with_regions(self.label.clone(), instructions, regions)
    }

    /// A copy of this program with `suffix` appended, labeled with `region`.
    pub fn with_suffix(&self, suffix: Vec<Instruction>, region: &str) -> Result<Program> {
        let mut regions = self.regions.clone();
        regions.extend(vec![Some(region.to_string()); suffix.len()]);
        let mut instructions = self.instructions.clone();
        instructions.extend(suffix);
        Program::with_regions(self.label.clone(), instructions, regions)
    }

    /// Number of cursor positions, counting the position past the last step.
    pub fn cursor_positions(&self) -> usize {
        self.steps.len() + 1
    }

    /// Region label of the top-level instruction the cursor is waiting on.
    pub fn region_at(&self, pc: u32) -> Option<&str> {
        self.steps.get(pc as usize).and_then(|s| self.regions[s.top()].as_deref())
    }

    pub fn step_at(&self, pc: u32) -> Option<&Step> {
        self.steps.get(pc as usize)
    }

    pub fn contains_declare(&self) -> bool {
        self.instructions.iter().any(Instruction::contains_declare)
    }

    pub fn declare_inside_repeat(&self) -> bool {
        self.instructions.iter().any(|i| matches!(i, Instruction::Repeat { .. }) && i.contains_declare())
    }

    /// Highest configuration index referenced, if any.
    pub fn max_config(&self) -> Option<Config> {
        let mut all = Vec::new();
        self.instructions.iter().for_each(|i| i.configs(&mut all));
        all.into_iter().max()
    }

    pub fn is_terminal(&self, state: &PrisonerState) -> bool {
        state.pc as usize >= self.steps.len()
    }

    /// Execute one visit of a prisoner at `state` into a room showing `observed`.
    pub fn visit(&self, state: PrisonerState, observed: Config) -> (PrisonerState, VisitOutcome) {
        let idle = VisitOutcome { new_config: observed, declared: false, fired: false };
        let Some(step) = self.steps.get(state.pc as usize) else {
            return (state, idle);
        };
        let mut next = state;
        let new_config = match &step.op {
            Op::Declare => {
                next.declared = true;
                next.pc += 1;
                return (next, VisitOutcome { new_config: observed, declared: true, fired: false });
            }
            Op::Flip { from, to } if *from == observed => {
                next.pc += 1;
                *to
            }
            Op::FlipNotIn { excluded, to } if !excluded.contains(&observed) => {
                next.pc += 1;
                *to
            }
            Op::See(c) if *c == observed => {
                next.pc += 1;
                observed
            }
            Op::Oscillate { first, second, k } if observed == *first || observed == *second => {
                if observed == *first {
                    next.net += 1;
                    if next.net >= *k as i32 {
                        next.net = 0;
                        next.pc += 1;
                    }
                    *second
                } else {
                    next.net -= 1;
                    *first
                }
            }
            _ => return (state, idle),
        };
        let mut declared = false;
        if matches!(self.steps.get(next.pc as usize), Some(Step { op: Op::Declare, .. })) {
            next.declared = true;
            next.pc += 1;
            declared = true;
        }
        (next, VisitOutcome { new_config, declared, fired: true })
    }
}

fn expand(instr: &Instruction, path: &mut Vec<usize>, iters: &mut Vec<u32>, out: &mut Vec<Step>) {
    let op = match instr {
        Instruction::Repeat { count, body } => {
            for it in 0..*count {
                iters.push(it);
                for (j, child) in body.iter().enumerate() {
                    path.push(j);
                    expand(child, path, iters, out);
                    path.pop();
                }
                iters.pop();
            }
            return;
        }
        Instruction::Flip { from, to } => Op::Flip { from: *from, to: *to },
        Instruction::FlipNotIn { excluded, to } => Op::FlipNotIn { excluded: excluded.clone(), to: *to },
        Instruction::See(c) => Op::See(*c),
        Instruction::Oscillate { first, second, k } => {
            Op::Oscillate { first: *first, second: *second, k: *k }
        }
        Instruction::Declare => Op::Declare,
    };
    out.push(Step { op, path: path.clone(), iterations: iters.clone() });
}

/// A prisoner's execution cursor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrisonerState {
    /// Index of the next step to execute; equal to the step count once finished.
    pub pc: u32,
    /// Net `first -> second` firings of the active Oscillate; zero elsewhere.
    pub net: i32,
    pub declared: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitOutcome {
    pub new_config: Config,
    pub declared: bool,
    pub fired: bool,
}

impl VisitOutcome {
    pub fn mutated(&self, observed: Config) -> bool {
        self.new_config != observed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CursorEdge {
    pub observed: Config,
    pub target: usize,
    pub fired: bool,
    pub declared: bool,
    pub mutated: bool,
}

/// Every cursor state a lone prisoner can reach when rooms may show any
/// configuration.
///
/// Oscillate net counts can fall without bound when a prisoner keeps seeing
/// `second`; the graph clamps them at `-k`. Every Oscillate node mutates on
/// its very next `first`/`second` sighting regardless of the net value, so
/// questions about the next mutation or declaration are answered exactly.
#[derive(Clone, Debug)]
pub struct CursorGraph {
    pub nodes: Vec<PrisonerState>,
    pub edges: Vec<Vec<CursorEdge>>,
    index: HashMap<PrisonerState, usize>,
}

impl CursorGraph {
    pub fn node(&self, state: &PrisonerState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn clamp_net(program: &Program, mut state: PrisonerState) -> PrisonerState {
    if let Some(Step { op: Op::Oscillate { k, .. }, .. }) = program.step_at(state.pc) {
        state.net = state.net.max(-(*k as i32));
    }
    state
}

pub fn reachable_cursor_graph(program: &Program, m: usize) -> CursorGraph {
    reachable_cursor_graph_from(program, m, PrisonerState::default())
}

pub fn reachable_cursor_graph_from(program: &Program, m: usize, start: PrisonerState) -> CursorGraph {
    let start = clamp_net(program, start);
    let mut graph = CursorGraph { nodes: vec![start], edges: vec![Vec::new()], index: HashMap::new() };
    graph.index.insert(start, 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let state = graph.nodes[id];
        let mut edges = Vec::with_capacity(m);
        for c in 0..m {
            let observed = Config(c as u8);
            let (next, out) = program.visit(state, observed);
            let next = clamp_net(program, next);
            let target = *graph.index.entry(next).or_insert_with(|| {
                graph.nodes.push(next);
                graph.edges.push(Vec::new());
                queue.push_back(graph.nodes.len() - 1);
                graph.nodes.len() - 1
            });
            edges.push(CursorEdge {
                observed,
                target,
                fired: out.fired,
                declared: out.declared,
                mutated: out.mutated(observed),
            });
        }
        graph.edges[id] = edges;
    }
    graph
}

/// Answers "can this prisoner ever again reconfigure a room or declare?"
/// for one program, memoizing over cursor states.
#[derive(Clone, Debug)]
pub struct ActivityOracle {
    m: usize,
    active: HashMap<PrisonerState, bool>,
}

impl ActivityOracle {
    pub fn new(m: usize) -> Self {
        ActivityOracle { m, active: HashMap::new() }
    }

    pub fn can_act(&mut self, program: &Program, state: PrisonerState) -> bool {
        let state = clamp_net(program, state);
        if let Some(&known) = self.active.get(&state) {
            return known;
        }
        let graph = reachable_cursor_graph_from(program, self.m, state);
        let mut live = vec![false; graph.len()];
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); graph.len()];
        let mut queue = VecDeque::new();
        for (id, edges) in graph.edges.iter().enumerate() {
            for e in edges {
                rev[e.target].push(id);
                if (e.mutated || e.declared) && !live[id] {
                    live[id] = true;
                    queue.push_back(id);
                }
            }
        }
        while let Some(id) = queue.pop_front() {
            for &p in &rev[id] {
                if !live[p] {
                    live[p] = true;
                    queue.push_back(p);
                }
            }
        }
        for (id, s) in graph.nodes.iter().enumerate() {
            self.active.insert(*s, live[id]);
        }
        live[0]
    }
}

/// True when no continuation lets the prisoner reconfigure a room or declare.
pub fn is_finished(program: &Program, m: usize, state: PrisonerState) -> bool {
    !ActivityOracle::new(m).can_act(program, state)
}

/// Shortest sequence of observed configurations, drawn from `allowed`, after
/// which the prisoner reconfigures a room or declares. The last element is
/// the observation on which that happens.
pub fn forcing_word(program: &Program, state: PrisonerState, allowed: &[Config]) -> Option<Vec<Config>> {
    let start = clamp_net(program, state);
    let mut parent: HashMap<PrisonerState, Option<(PrisonerState, Config)>> = HashMap::new();
    parent.insert(start, None);
    let mut queue = VecDeque::from([start]);
    let rebuild = |parent: &HashMap<PrisonerState, Option<(PrisonerState, Config)>>, mut at: PrisonerState| {
        let mut word = Vec::new();
        while let Some(Some((prev, c))) = parent.get(&at) {
            word.push(*c);
            at = *prev;
        }
        word.reverse();
        word
    };
    while let Some(s) = queue.pop_front() {
        for &c in allowed {
            let (next, out) = program.visit(s, c);
            if out.mutated(c) || out.declared {
                let mut word = rebuild(&parent, s);
                word.push(c);
                return Some(word);
            }
            let next = clamp_net(program, next);
            if let std::collections::hash_map::Entry::Vacant(v) = parent.entry(next) {
                v.insert(Some((s, c)));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Configurations referenced anywhere in a program set.
pub fn referenced_configs(programs: &[Program]) -> HashSet<Config> {
    let mut all = Vec::new();
    for p in programs {
        p.instructions.iter().for_each(|i| i.configs(&mut all));
    }
    all.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const OFF: u8 = 0;
    const ON: u8 = 1;

    fn prog(instrs: Vec<Instruction>) -> Program {
        Program::new("t", instrs).unwrap()
    }

    #[test]
    fn flip_fires_on_match() {
        let p = prog(vec![flip(OFF, ON)]);
        let (s, out) = p.visit(PrisonerState::default(), Config(OFF));
        assert_eq!(out.new_config, Config(ON));
        assert!(out.fired);
        assert_eq!(s.pc, 1);
    }

    #[test]
    fn unmatched_guard_waits() {
        let p = prog(vec![flip(OFF, ON)]);
        let start = PrisonerState::default();
        let (s, out) = p.visit(start, Config(ON));
        assert_eq!(out.new_config, Config(ON));
        assert!(!out.fired);
        assert_eq!(s, start);
    }

    #[test]
    fn finished_cursor_is_absorbing() {
        let p = prog(vec![flip(OFF, ON)]);
        let done = PrisonerState { pc: 1, ..Default::default() };
        for c in [OFF, ON] {
            let (s, out) = p.visit(done, Config(c));
            assert_eq!(s, done);
            assert_eq!(out.new_config, Config(c));
            assert!(!out.fired);
        }
    }

    #[test]
    fn oscillate_k1_completes_on_first_forward_toggle() {
        let p = prog(vec![
            Instruction::Oscillate { first: Config(1), second: Config(0), k: 1 },
            flip(2, 0),
        ]);
        let (s, out) = p.visit(PrisonerState::default(), Config(1));
        assert_eq!(out.new_config, Config(0));
        assert!(out.fired);
        assert_eq!(s.pc, 1);
        assert_eq!(s.net, 0);
    }

    #[test]
    fn oscillate_tracks_net_until_k() {
        let p = prog(vec![Instruction::Oscillate { first: Config(1), second: Config(0), k: 2 }]);
        let mut s = PrisonerState::default();
        let trace = [(0, 1, -1), (1, 0, 0), (1, 0, 1)];
        for (seen, left, net) in trace {
            let (n, out) = p.visit(s, Config(seen));
            assert_eq!(out.new_config, Config(left));
            assert_eq!(n.net, net);
            assert_eq!(n.pc, 0);
            s = n;
        }
        let (n, _) = p.visit(s, Config(1));
        assert_eq!(n.pc, 1);
        assert_eq!(n.net, 0);
    }

    #[test]
    fn trailing_declare_piggybacks() {
        let p = prog(vec![repeat(1, vec![flip(ON, OFF)]), Instruction::Declare]);
        let (s, out) = p.visit(PrisonerState::default(), Config(ON));
        assert!(out.fired && out.declared);
        assert!(s.declared);
        assert!(p.is_terminal(&s));
    }

    #[test]
    fn leading_declare_fires_on_first_visit() {
        let p = prog(vec![Instruction::Declare]);
        let (s, out) = p.visit(PrisonerState::default(), Config(ON));
        assert!(out.declared && !out.fired);
        assert!(s.declared);
    }

    #[test]
    fn zero_iteration_repeat_is_skipped() {
        let p = prog(vec![repeat(0, vec![flip(0, 1)]), flip(1, 0)]);
        assert_eq!(p.steps().len(), 1);
        let (s, out) = p.visit(PrisonerState::default(), Config(1));
        assert!(out.fired);
        assert_eq!(s.pc, 1);
    }

    #[test]
    fn only_one_guard_fires_per_visit() {
        let p = prog(vec![flip(0, 1), flip(1, 0)]);
        let (s, out) = p.visit(PrisonerState::default(), Config(0));
        assert_eq!(out.new_config, Config(1));
        assert_eq!(s.pc, 1);
    }

    #[test]
    fn empty_repeat_body_is_rejected() {
        assert!(Program::new("bad", vec![repeat(2, vec![])]).is_err());
    }

    #[test]
    fn cursor_graph_of_lone_declare() {
        let g = reachable_cursor_graph(&prog(vec![Instruction::Declare]), 2);
        assert_eq!(g.len(), 2);
        assert!(g.edges[0].iter().all(|e| e.declared && e.target == 1));
    }

    #[test]
    fn one_room_leader_cursor_positions() {
        // REPEAT(2) FLIP(ON->OFF); DECLARE
        let p = prog(vec![repeat(2, vec![flip(ON, OFF)]), Instruction::Declare]);
        assert_eq!(p.cursor_positions(), 4);
        // The Declare position is transient: it executes in the visit that
        // completes the loop, so the graph holds three resting states.
        let g = reachable_cursor_graph(&p, 2);
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn oscillate_nets_are_distinct_nodes() {
        let p = prog(vec![Instruction::Oscillate { first: Config(1), second: Config(0), k: 2 }]);
        let g = reachable_cursor_graph(&p, 2);
        let nets: HashSet<i32> = g.nodes.iter().filter(|s| s.pc == 0).map(|s| s.net).collect();
        assert!(nets.contains(&0) && nets.contains(&1));
        assert!(g.edges.iter().flatten().all(|e| e.target < g.len()));
    }

    #[test]
    fn finished_detection() {
        let p = prog(vec![flip(0, 1), see(1)]);
        assert!(!is_finished(&p, 2, PrisonerState::default()));
        // Only a See remains: it can fire but never mutates.
        assert!(is_finished(&p, 2, PrisonerState { pc: 1, ..Default::default() }));
        assert!(is_finished(&p, 2, PrisonerState { pc: 2, ..Default::default() }));
    }

    #[test]
    fn forcing_word_goes_through_see() {
        let p = prog(vec![see(1), see(0), flip(0, 1)]);
        let w = forcing_word(&p, PrisonerState::default(), &[Config(0), Config(1)]).unwrap();
        assert_eq!(w, vec![Config(1), Config(0), Config(0)]);
        assert_eq!(forcing_word(&p, PrisonerState::default(), &[Config(0)]), None);
    }
}
