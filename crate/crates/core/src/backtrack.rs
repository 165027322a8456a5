//! Execution history for rewinding, and forbidden joint service sets.

use std::collections::{BTreeMap, BTreeSet};

use crate::agent::Event;
use crate::automata::AgentId;

/// Joint service sets forbidden per (task automaton, state).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Forbidden {
    map: BTreeMap<(AgentId, usize), BTreeSet<BTreeSet<String>>>,
}

impl Forbidden {
    /// Adds an entry; returns whether it was new.
    pub fn insert(&mut self, agent: AgentId, q: usize, services: BTreeSet<String>) -> bool {
        self.map.entry((agent, q)).or_default().insert(services)
    }

    pub fn at(&self, agent: AgentId, q: usize) -> impl Iterator<Item = &BTreeSet<String>> + '_ {
        self.map.get(&(agent, q)).into_iter().flatten()
    }

    pub fn contains(&self, agent: AgentId, q: usize, services: &BTreeSet<String>) -> bool {
        self.map.get(&(agent, q)).is_some_and(|s| s.contains(services))
    }

    pub fn len(&self) -> usize {
        self.map.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Full system state between two steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Snapshot {
    pub states: Vec<usize>,
    pub qs: Vec<usize>,
    pub ordering: Vec<AgentId>,
}

/// A step taken from `snapshot` at time `time` (zero-based position in the
/// executed traces).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub time: usize,
    pub snapshot: Snapshot,
    pub events: Vec<Event>,
}

/// Steps leading to the current snapshot, with cycles between identical
/// snapshots cut out as they close.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    records: Vec<Record>,
}

impl History {
    /// Appends the step `record` that led to `next`. If `next` already occurs
    /// in the history, the cycle back to it is dropped.
    pub fn push(&mut self, record: Record, next: &Snapshot) {
        self.records.push(record);
        self.cut_cycle(next);
    }

    /// Drops everything from the first step taken out of `next` on, so that
    /// the history leads to `next` without revisiting it.
    pub fn cut_cycle(&mut self, next: &Snapshot) {
        if let Some(j) = self.records.iter().position(|r| &r.snapshot == next) {
            self.records.truncate(j);
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.records.truncate(len);
    }
}

/// Removes the segments between repeated items of a sequence: each time an
/// item reappears, everything after its first occurrence is cut.
pub fn compress<T: PartialEq + Clone>(seq: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in seq {
        if let Some(j) = out.iter().position(|y| y == x) {
            out.truncate(j);
        }
        out.push(x.clone());
    }
    out
}

/// Successor combinations already tried per rewound step, kept across
/// rewinds.
#[derive(Debug, Clone, Default)]
pub struct Tried {
    map: BTreeMap<(Snapshot, Vec<Event>), BTreeSet<Vec<usize>>>,
}

impl Tried {
    /// Marks `combo` as tried; returns whether it was untried before.
    pub fn mark(&mut self, snapshot: &Snapshot, events: &[Event], combo: Vec<usize>) -> bool {
        self.map.entry((snapshot.clone(), events.to_vec())).or_default().insert(combo)
    }

    pub fn contains(&self, snapshot: &Snapshot, events: &[Event], combo: &[usize]) -> bool {
        self.map.get(&(snapshot.clone(), events.to_vec())).is_some_and(|s| s.contains(combo))
    }
}

/// All combinations picking one entry per position, in lexicographic order.
pub fn combinations(options: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for opts in options {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.push(*o);
                    v
                })
            })
            .collect();
    }
    out
}
