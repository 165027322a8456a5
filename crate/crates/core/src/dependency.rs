//! Participating services, horizon alphabets and the dependency partition.
//!
//! Agent sets are `u64` masks over zero-based agent indices.

use std::collections::BTreeSet;

use crate::automata::graph::ball;
use crate::automata::{AgentId, BuchiAutomaton};

pub type AgentMask = u64;

pub fn agent_bit(a: AgentId) -> AgentMask {
    1 << a.0
}

pub fn agents_of(mask: AgentMask) -> impl Iterator<Item = AgentId> {
    (0..64).filter(move |i| mask & (1 << i) != 0).map(AgentId)
}

/// Whether the services `owned` (those of some agent other than the automaton
/// owner) participate in state `q`: some transition out of `q` stops existing
/// when their part of the symbol is changed.
pub fn is_participating(aut: &BuchiAutomaton, q: usize, owned: &BTreeSet<String>) -> bool {
    let j = aut.mask_of(owned.iter().map(String::as_str));
    if j == 0 {
        return false;
    }
    if aut.letters().len() > 16 {
        // too many letters to enumerate; any guard literal on these services
        // is treated as a constraint
        return aut.outgoing(q).any(|t| (t.label.pos | t.label.neg) & j != 0);
    }
    for q2 in aut.successors(q) {
        let set = aut.symbol_set(q, q2).expect("letter count checked");
        let has = |s: u64| set[(s / 64) as usize] & (1 << (s % 64)) != 0;
        for sym in 0..(1u64 << aut.letters().len()) {
            if !has(sym) {
                continue;
            }
            // the cylinder of sym over j lies inside the set iff the set is
            // closed under single flips of j-bits from every member
            let mut bits = j;
            while bits != 0 {
                let b = bits & bits.wrapping_neg();
                bits &= !b;
                if !has(sym ^ b) {
                    return true;
                }
            }
        }
    }
    false
}

/// Per-state participating agents of one task automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Participation {
    per_state: Vec<AgentMask>,
}

impl Participation {
    /// `owner` always participates; every other agent participates where
    /// [`is_participating`] holds for its service set.
    pub fn compute(aut: &BuchiAutomaton, owner: AgentId, services: &[BTreeSet<String>]) -> Participation {
        let per_state = (0..aut.num_states())
            .map(|q| {
                let mut m = agent_bit(owner);
                for (j, svc) in services.iter().enumerate() {
                    if j != owner.0 && is_participating(aut, q, svc) {
                        m |= 1 << j;
                    }
                }
                m
            })
            .collect();
        Participation { per_state }
    }

    pub fn at(&self, q: usize) -> AgentMask {
        self.per_state[q]
    }

    /// Agents whose services make up the alphabet up to horizon `h` at `q`.
    pub fn up_to_horizon(&self, aut: &BuchiAutomaton, q: usize, h: usize) -> AgentMask {
        ball(aut, q, h).into_iter().fold(0, |m, p| m | self.per_state[p])
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Dependency classes from each agent's horizon alphabet (`horizon[k]` is the
/// set of agents whose services lie in agent k's horizon alphabet). Agents j
/// and k share a class when one lies in the other's set, closed under
/// transitivity. Members are listed in priority order and classes are
/// ordered by their highest-priority member.
pub fn dependency_partition(horizon: &[AgentMask], ordering: &[AgentId]) -> Vec<Vec<AgentId>> {
    let n = horizon.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for (k, mask) in horizon.iter().enumerate() {
        for j in agents_of(*mask) {
            if j.0 < n {
                let (a, b) = (find(&mut parent, k), find(&mut parent, j.0));
                parent[a] = b;
            }
        }
    }
    let mut classes: Vec<Vec<AgentId>> = Vec::new();
    let mut root_class: Vec<Option<usize>> = vec![None; n];
    for a in ordering {
        let r = find(&mut parent, a.0);
        match root_class[r] {
            Some(c) => classes[c].push(*a),
            None => {
                root_class[r] = Some(classes.len());
                classes.push(vec![*a]);
            }
        }
    }
    classes
}
