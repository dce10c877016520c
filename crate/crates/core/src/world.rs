//! Joint world state and the single-step transition shared by the simulator
//! and the explorer.

use serde::{Deserialize, Serialize};

use crate::library::ProtocolInstance;
use crate::protocol::{Config, PrisonerState};

/// What must hold for a declaration to count as correct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WinCondition {
    /// Every prisoner has visited every room at least `min_visits` times.
    AllRoomsAllPrisoners { min_visits: u32 },
    /// Every prisoner has visited at least one room.
    AtLeastOneRoom,
    /// Every prisoner must declare, each declaration made after every
    /// prisoner has visited every room.
    AllMustDeclare,
}

impl Default for WinCondition {
    fn default() -> Self {
        WinCondition::AllRoomsAllPrisoners { min_visits: 1 }
    }
}

impl WinCondition {
    /// Visit counts above this value never influence the verdict.
    pub fn visit_cap(&self) -> u32 {
        match self {
            WinCondition::AllRoomsAllPrisoners { min_visits } => (*min_visits).max(1),
            _ => 1,
        }
    }

    pub fn satisfied(&self, visits: &[u32], n: usize, r: usize) -> bool {
        match self {
            WinCondition::AllRoomsAllPrisoners { min_visits } => visits.iter().all(|&v| v >= *min_visits),
            WinCondition::AtLeastOneRoom => (0..n).all(|p| visits[p * r..(p + 1) * r].iter().any(|&v| v > 0)),
            WinCondition::AllMustDeclare => visits.iter().all(|&v| v >= 1),
        }
    }

    pub fn name(&self) -> String {
        match self {
            WinCondition::AllRoomsAllPrisoners { min_visits: 1 } => "all-rooms".into(),
            WinCondition::AllRoomsAllPrisoners { min_visits } => format!("all-rooms-x{min_visits}"),
            WinCondition::AtLeastOneRoom => "at-least-one-room".into(),
            WinCondition::AllMustDeclare => "all-declare".into(),
        }
    }

    pub fn parse(s: &str) -> Option<WinCondition> {
        match s {
            "all-rooms" => Some(WinCondition::default()),
            "at-least-one-room" => Some(WinCondition::AtLeastOneRoom),
            "all-declare" => Some(WinCondition::AllMustDeclare),
            other => other
                .strip_prefix("all-rooms-x")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &u32| k >= 1)
                .map(|min_visits| WinCondition::AllRoomsAllPrisoners { min_visits }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisitEvent {
    pub prisoner: usize,
    pub room: usize,
}

/// Rooms, prisoner cursors, the visit matrix and declarations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub rooms: Vec<Config>,
    pub prisoners: Vec<PrisonerState>,
    /// Row-major prisoner x room visit counts, saturating at `cap`.
    pub visits: Vec<u32>,
    pub declared: Vec<bool>,
    pub cap: u32,
}

/// Everything that happened during one visit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub prisoner: usize,
    pub room: usize,
    pub config_before: Config,
    pub config_after: Config,
    pub fired: bool,
    pub declared: bool,
}

/// Classification of a declaration made during a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Declaration {
    None,
    Correct,
    Incorrect,
}

impl WorldState {
    pub fn initial(instance: &ProtocolInstance, cap: u32) -> WorldState {
        WorldState {
            rooms: instance.start.clone(),
            prisoners: vec![PrisonerState::default(); instance.n],
            visits: vec![0; instance.n * instance.r],
            declared: vec![false; instance.n],
            cap,
        }
    }

    pub fn with_rooms(instance: &ProtocolInstance, rooms: Vec<Config>, cap: u32) -> WorldState {
        WorldState { rooms, ..WorldState::initial(instance, cap) }
    }

    pub fn visits_of(&self, prisoner: usize) -> &[u32] {
        let r = self.rooms.len();
        &self.visits[prisoner * r..(prisoner + 1) * r]
    }

    pub fn all_declared(&self) -> bool {
        self.declared.iter().all(|&d| d)
    }

    /// Apply one visit in place; returns the step record and how any
    /// declaration made during it is judged under `win`.
    pub fn apply(
        &mut self,
        instance: &ProtocolInstance,
        event: VisitEvent,
        win: WinCondition,
        step: u64,
    ) -> (StepRecord, Declaration) {
        let VisitEvent { prisoner, room } = event;
        let r = self.rooms.len();
        let before = self.rooms[room];
        let (next, out) = instance.visit(prisoner, self.prisoners[prisoner], before);
        self.prisoners[prisoner] = next;
        self.rooms[room] = out.new_config;
        let slot = &mut self.visits[prisoner * r + room];
        *slot = (*slot + 1).min(self.cap);
        let mut verdict = Declaration::None;
        if out.declared {
            self.declared[prisoner] = true;
            verdict = if win.satisfied(&self.visits, instance.n, r) {
                Declaration::Correct
            } else {
                Declaration::Incorrect
            };
        }
        let record = StepRecord {
            step,
            prisoner,
            room,
            config_before: before,
            config_after: out.new_config,
            fired: out.fired,
            declared: out.declared,
        };
        (record, verdict)
    }
}
