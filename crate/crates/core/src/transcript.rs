//! Unbounded configurations: every room carries an append-only transcript.
//!
//! On each visit a prisoner appends its name and its running visit count.
//! Rooms whose transcripts are not prefixes of one another are distinct,
//! and a transcript later seen extended by entries naming every prisoner
//! proves that everyone visited that room. A prisoner declares once it holds
//! `r` such transcripts that are pairwise non-prefix.

use std::fmt;

use serde::Serialize;

use crate::verifier::Outcome;
use crate::world::VisitEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Entry {
    pub prisoner: u32,
    pub k: u32,
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}#{}", self.prisoner, self.k)
    }
}

pub type Transcript = Vec<Entry>;

pub fn render(t: &[Entry]) -> String {
    if t.is_empty() {
        return "(empty)".into();
    }
    t.iter().map(Entry::to_string).collect::<Vec<_>>().join("/")
}

fn strictly_extends(u: &[Entry], t: &[Entry]) -> bool {
    u.len() > t.len() && u.starts_with(t)
}

/// One prisoner's memory: its visit count and every transcript it found on
/// entering a room.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranscriptKnowledge {
    pub visits: u32,
    pub observed: Vec<Transcript>,
}

impl TranscriptKnowledge {
    /// Observed transcripts later seen extended by entries naming all `n`
    /// prisoners, keeping only those not a prefix of another such.
    pub fn certified(&self, n: usize) -> Vec<&Transcript> {
        let names_all = |suffix: &[Entry]| {
            let mut seen = vec![false; n];
            suffix.iter().filter(|e| (e.prisoner as usize) < n).for_each(|e| seen[e.prisoner as usize] = true);
            seen.iter().all(|&s| s)
        };
        let covered: Vec<&Transcript> = self
            .observed
            .iter()
            .filter(|t| self.observed.iter().any(|u| strictly_extends(u, t) && names_all(&u[t.len()..])))
            .collect();
        covered.iter().copied().filter(|t| !covered.iter().any(|u| strictly_extends(u, t))).collect()
    }

    /// Enter a room, append, and report whether this prisoner now declares.
    pub fn visit(&mut self, room: &mut Transcript, prisoner: usize, n: usize, r: usize) -> bool {
        if !self.observed.contains(room) {
            self.observed.push(room.clone());
        }
        self.visits += 1;
        room.push(Entry { prisoner: prisoner as u32, k: self.visits });
        self.certified(n).len() >= r
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TranscriptStep {
    pub step: u64,
    pub prisoner: usize,
    pub room: usize,
    pub before: String,
    pub after: String,
    pub declared: bool,
}

#[derive(Clone, Debug)]
pub struct TranscriptWorld {
    pub n: usize,
    pub r: usize,
    pub rooms: Vec<Transcript>,
    pub knowledge: Vec<TranscriptKnowledge>,
    pub visits: Vec<u32>,
}

impl TranscriptWorld {
    pub fn new(n: usize, r: usize, prefixes: Vec<Transcript>) -> TranscriptWorld {
        assert_eq!(prefixes.len(), r, "one prefix per room");
        TranscriptWorld { n, r, rooms: prefixes, knowledge: vec![TranscriptKnowledge::default(); n], visits: vec![0; n * r] }
    }

    pub fn all_visited(&self) -> bool {
        self.visits.iter().all(|&v| v > 0)
    }

    /// Returns whether the visiting prisoner declared.
    pub fn apply(&mut self, e: VisitEvent) -> bool {
        self.visits[e.prisoner * self.r + e.room] += 1;
        self.knowledge[e.prisoner].visit(&mut self.rooms[e.room], e.prisoner, self.n, self.r)
    }
}

/// Run the transcript protocol on a fixed event sequence.
pub fn run_transcript(
    n: usize,
    r: usize,
    prefixes: Vec<Transcript>,
    events: impl IntoIterator<Item = VisitEvent>,
    max_steps: u64,
) -> (Outcome, Vec<TranscriptStep>) {
    let mut world = TranscriptWorld::new(n, r, prefixes);
    let mut trace = Vec::new();
    for (i, e) in events.into_iter().take(max_steps as usize).enumerate() {
        let step = i as u64 + 1;
        let before = render(&world.rooms[e.room]);
        let declared = world.apply(e);
        trace.push(TranscriptStep { step, prisoner: e.prisoner, room: e.room, before, after: render(&world.rooms[e.room]), declared });
        if declared {
            let outcome = if world.all_visited() {
                Outcome::DeclaredCorrect { step }
            } else {
                Outcome::DeclaredIncorrect { step, prisoner: e.prisoner }
            };
            return (outcome, trace);
        }
    }
    (Outcome::StepLimit { step: trace.len() as u64 }, trace)
}

#[derive(Clone, Debug)]
pub struct PrefixSearch {
    pub prefix_sets: usize,
    pub schedules: u64,
    pub declarations: u64,
    /// Prefixes and schedule of the first incorrect declaration.
    pub counterexample: Option<(Vec<Transcript>, Vec<VisitEvent>)>,
}

impl PrefixSearch {
    pub fn safe(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// All transcripts over `alphabet` of length at most `max_len`.
pub fn prefixes_up_to(alphabet: &[Entry], max_len: usize) -> Vec<Transcript> {
    let mut all = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let next: Vec<Transcript> = layer
            .iter()
            .flat_map(|t: &Transcript| {
                alphabet.iter().map(move |&e| {
                    let mut u = t.clone();
                    u.push(e);
                    u
                })
            })
            .collect();
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// Entries naming each real prisoner with indices `1..=max_k`.
pub fn forged_alphabet(n: usize, max_k: u32) -> Vec<Entry> {
    (1..=max_k).flat_map(|k| (0..n as u32).map(move |p| Entry { prisoner: p, k })).collect()
}

fn dfs(world: &TranscriptWorld, depth: usize, path: &mut Vec<VisitEvent>, out: &mut PrefixSearch, prefixes: &[Transcript]) {
    if out.counterexample.is_some() {
        return;
    }
    if depth == 0 {
        out.schedules += 1;
        return;
    }
    for prisoner in 0..world.n {
        for room in 0..world.r {
            let e = VisitEvent { prisoner, room };
            let mut next = world.clone();
            path.push(e);
            if next.apply(e) {
                out.declarations += 1;
                out.schedules += 1;
                if !next.all_visited() {
                    out.counterexample = Some((prefixes.to_vec(), path.clone()));
                }
            } else {
                dfs(&next, depth - 1, path, out, prefixes);
            }
            path.pop();
        }
    }
}

/// Non-decreasing index tuples of length `r` over `0..k`.
fn multisets(k: usize, r: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == r {
        out.push(cur.clone());
        return;
    }
    for i in from..k {
        cur.push(i);
        multisets(k, r, i, cur, out);
        cur.pop();
    }
}

/// Every schedule of `depth` visits, from every assignment of the given
/// prefixes to rooms up to room order.
pub fn search_prefixes(n: usize, r: usize, prefixes: &[Transcript], depth: usize) -> PrefixSearch {
    let mut out = PrefixSearch { prefix_sets: 0, schedules: 0, declarations: 0, counterexample: None };
    let mut assignments = Vec::new();
    multisets(prefixes.len(), r, 0, &mut Vec::new(), &mut assignments);
    for set in assignments {
        let set: Vec<Transcript> = set.iter().map(|&i| prefixes[i].clone()).collect();
        out.prefix_sets += 1;
        let world = TranscriptWorld::new(n, r, set.clone());
        dfs(&world, depth, &mut Vec::with_capacity(depth), &mut out, &set);
        if out.counterexample.is_some() {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduling::RoundRobin;

    #[test]
    fn single_prisoner_single_room_declares_on_second_visit() {
        let events = (0..10).map(|_| VisitEvent { prisoner: 0, room: 0 });
        let (outcome, trace) = run_transcript(1, 1, vec![vec![]], events, 10);
        assert_eq!(outcome, Outcome::DeclaredCorrect { step: 2 });
        assert_eq!(trace[0].after, "p0#1");
    }

    #[test]
    fn identical_prefixes_are_not_distinguished() {
        let mut k = TranscriptKnowledge::default();
        let mut a = vec![];
        assert!(!k.visit(&mut a, 0, 1, 2));
        let mut b = vec![];
        assert!(!k.visit(&mut b, 0, 1, 2));
        assert_eq!(k.observed.len(), 1);
    }

    #[test]
    fn prefix_enumeration_counts() {
        let alpha = forged_alphabet(2, 2);
        assert_eq!(alpha.len(), 4);
        assert_eq!(prefixes_up_to(&alpha, 3).len(), 1 + 4 + 16 + 64);
    }

    #[test]
    fn unordered_assignments() {
        let prefixes = prefixes_up_to(&forged_alphabet(2, 1), 1);
        let s = search_prefixes(2, 2, &prefixes, 0);
        assert_eq!(s.prefix_sets, 6);
    }

    #[test]
    fn round_robin_three_by_three() {
        let events = (0..).map(|t| RoundRobin::event_at(3, 3, t));
        let (outcome, _) = run_transcript(3, 3, vec![vec![]; 3], events, 90);
        assert!(outcome.is_correct(), "{outcome:?}");
    }
}
