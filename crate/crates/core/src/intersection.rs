//! Horizon-bounded intersection of a dependency class's task automata.
//!
//! States are component tuples plus a progress counter `k`. Position
//! `(k - 1) mod n` of the priority-ordered class is the tracked component;
//! a step where it fires out of an accepting state increments `k`.
//! The automaton is unfolded breadth first; states at the horizon depth are
//! kept but not expanded.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::automata::graph::distances_to;
use crate::automata::symbol::{full_mask, Cube, Letter};
use crate::automata::{AgentId, Alphabet, BuchiAutomaton, Transition};
use crate::backtrack::Forbidden;

/// One agent of a class as seen by the intersection.
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub agent: AgentId,
    pub automaton: &'a BuchiAutomaton,
    pub state: usize,
    pub services: &'a BTreeSet<String>,
}

/// The joint alphabet of a class: member services and silent markers, sorted
/// by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAlphabet {
    pub letters: Vec<Letter>,
    /// Own-service bits of each member, in member order.
    pub own: Vec<u64>,
    /// Silent-marker bit of each member.
    pub silent: Vec<u64>,
}

impl ClassAlphabet {
    pub fn new(members: &[Member]) -> ClassAlphabet {
        let mut letters: Vec<Letter> = Vec::new();
        for m in members {
            letters.extend(m.services.iter().map(|s| Letter::service(s.clone())));
            letters.push(Letter::Silent(m.agent));
        }
        letters.sort();
        let bit = |l: &Letter| 1u64 << letters.iter().position(|x| x == l).expect("letter present");
        let own = members
            .iter()
            .map(|m| m.services.iter().fold(0, |acc, s| acc | bit(&Letter::service(s.clone()))))
            .collect();
        let silent = members.iter().map(|m| bit(&Letter::Silent(m.agent))).collect();
        ClassAlphabet { letters, own, silent }
    }

    pub fn full(&self) -> u64 {
        full_mask(self.letters.len())
    }

    pub fn bit_of(&self, name: &str) -> Option<u64> {
        self.letters.iter().position(|l| l.to_string() == name).map(|i| 1 << i)
    }

    /// Member `m`'s event in a joint symbol: `None` when silent, otherwise the
    /// served service names.
    pub fn event_of(&self, m: usize, sym: u64) -> Option<BTreeSet<String>> {
        if sym & self.silent[m] != 0 {
            return None;
        }
        Some(
            self.letters
                .iter()
                .enumerate()
                .filter(|(i, _)| (sym & self.own[m]) & (1 << i) != 0)
                .map(|(_, l)| l.to_string())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AState {
    pub comps: Vec<usize>,
    pub k: u32,
}

/// Progressive value `(k, -dist)`; `None` distance stands for −∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value {
    pub k: u32,
    pub neg_dist: Option<i64>,
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    /// Lexicographic, with −∞ below every finite distance.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let d = |v: &Value| v.neg_dist.map_or(i64::MIN, |x| x);
        self.k.cmp(&other.k).then(d(self).cmp(&d(other)))
    }
}

/// A move of one component: stay put (silent) or fire a transition.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Move {
    pub cube: Cube,
    pub dst: usize,
}

#[derive(Debug, Clone)]
pub struct IntersectionAutomaton {
    pub alphabet: ClassAlphabet,
    members: Vec<AgentId>,
    accepting_comp: Vec<Vec<bool>>,
    states: Vec<AState>,
    index: HashMap<AState, usize>,
    depth: Vec<usize>,
    expanded: Vec<bool>,
    edges: Vec<Vec<(Cube, usize)>>,
    horizon: usize,
    // per member: component state -> moves
    moves: Vec<BTreeMap<usize, Vec<Move>>>,
    alive: Vec<bool>,
    dist: Vec<Option<usize>>,
}

/// Result of unfolding until the accepting set is nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extension {
    /// `F_A` nonempty at the reported horizon.
    Accepting(usize),
    /// No new states appear and `F_A` is still empty.
    Saturated,
    /// The horizon cap was reached first.
    Budget,
}

pub(crate) fn component_moves(
    alphabet: &ClassAlphabet,
    m: usize,
    member: &Member,
    q: usize,
    forbidden: &Forbidden,
) -> Vec<Move> {
    let aut = member.automaton;
    // automaton letter index -> class bit (None for letters outside the class)
    let map: Vec<Option<u64>> = aut.letters().iter().map(|l| alphabet.bit_of(&l.to_string())).collect();
    let relevant = map.iter().flatten().fold(0, |a, b| a | b);
    let banned: Vec<u64> = forbidden
        .at(member.agent, q)
        .map(|w| w.iter().filter_map(|s| alphabet.bit_of(s)).fold(0, |a, b| a | b) & relevant)
        .collect();
    let mut out = vec![Move { cube: Cube { pos: alphabet.silent[m], neg: alphabet.own[m] }, dst: q }];
    'edges: for t in aut.outgoing(q) {
        let mut cube = Cube { pos: 0, neg: alphabet.silent[m] };
        for (i, bit) in map.iter().enumerate() {
            let b = 1u64 << i;
            match bit {
                Some(cb) if t.label.pos & b != 0 => cube.pos |= cb,
                Some(cb) if t.label.neg & b != 0 => cube.neg |= cb,
                None if t.label.pos & b != 0 => continue 'edges,
                _ => {}
            }
        }
        if !cube.is_consistent() {
            continue;
        }
        let mut pieces = vec![cube];
        for w in &banned {
            pieces = pieces.into_iter().flat_map(|c| c.minus_point(*w, relevant)).collect();
        }
        out.extend(pieces.into_iter().map(|cube| Move { cube, dst: t.dst }));
    }
    out
}

impl IntersectionAutomaton {
    /// Unfolds the intersection of `members` (in priority order) to depth `h`.
    pub fn build(members: &[Member], forbidden: &Forbidden, h: usize) -> IntersectionAutomaton {
        assert!(!members.is_empty(), "a class has at least one member");
        let alphabet = ClassAlphabet::new(members);
        let mut moves = vec![BTreeMap::new(); members.len()];
        // precompute moves for every component state reachable in the
        // component automaton (cheap: automata are small)
        for (m, member) in members.iter().enumerate() {
            for q in 0..member.automaton.num_states() {
                moves[m].insert(q, component_moves(&alphabet, m, member, q, forbidden));
            }
        }
        let init = AState { comps: members.iter().map(|m| m.state).collect(), k: 1 };
        let mut a = IntersectionAutomaton {
            alphabet,
            members: members.iter().map(|m| m.agent).collect(),
            accepting_comp: members
                .iter()
                .map(|m| (0..m.automaton.num_states()).map(|q| m.automaton.is_accepting(q)).collect())
                .collect(),
            states: Vec::new(),
            index: HashMap::new(),
            depth: Vec::new(),
            expanded: Vec::new(),
            edges: Vec::new(),
            horizon: 0,
            moves,
            alive: Vec::new(),
            dist: Vec::new(),
        };
        a.add_state(init, 0);
        for _ in 0..h {
            a.extend();
        }
        a.refresh();
        a
    }

    fn add_state(&mut self, s: AState, depth: usize) -> (usize, bool) {
        if let Some(i) = self.index.get(&s) {
            return (*i, false);
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.depth.push(depth);
        self.expanded.push(false);
        self.edges.push(Vec::new());
        (i, true)
    }

    fn tracked(&self, k: u32) -> usize {
        (k as usize - 1) % self.members.len()
    }

    /// Whether the tracked component of `q` is accepting (ignores the
    /// initial-state exclusion).
    fn tracked_accepting(&self, q: usize) -> bool {
        let s = &self.states[q];
        let p = self.tracked(s.k);
        self.accepting_comp[p][s.comps[p]]
    }

    /// Joint successors. The counter moves on when the tracked component
    /// fires out of an accepting state; a silent stay does not count.
    fn successors_of(&self, q: usize) -> Vec<(Cube, AState)> {
        let s = &self.states[q];
        let tracked = self.tracked(s.k);
        let acc = self.tracked_accepting(q);
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Cube, Vec<usize>, bool)> = vec![(0, Cube::TOP, Vec::new(), false)];
        while let Some((m, cube, comps, bump)) = stack.pop() {
            if m == self.members.len() {
                out.push((cube, AState { comps, k: if bump { s.k + 1 } else { s.k } }));
                continue;
            }
            for mv in &self.moves[m][&s.comps[m]] {
                if let Some(c) = cube.conjoin(&mv.cube) {
                    let mut next = comps.clone();
                    next.push(mv.dst);
                    let fired = mv.cube.pos & self.alphabet.silent[m] == 0;
                    stack.push((m + 1, c, next, bump || (m == tracked && acc && fired)));
                }
            }
        }
        out
    }

    /// Adds one layer. Returns the number of new states.
    fn extend(&mut self) -> usize {
        let frontier: Vec<usize> = (0..self.states.len())
            .filter(|q| !self.expanded[*q] && self.depth[*q] == self.horizon)
            .collect();
        let mut added = 0;
        for q in frontier {
            let mut edges = Vec::new();
            for (cube, s) in self.successors_of(q) {
                let (dst, new) = self.add_state(s, self.horizon + 1);
                added += usize::from(new);
                edges.push((cube, dst));
            }
            edges.sort();
            edges.dedup();
            self.edges[q] = edges;
            self.expanded[q] = true;
        }
        self.horizon += 1;
        added
    }

    fn refresh(&mut self) {
        let n = self.states.len();
        let mut pred = vec![Vec::new(); n];
        for (q, es) in self.edges.iter().enumerate() {
            for (_, d) in es {
                pred[*d].push(q);
            }
        }
        let targets: Vec<usize> = (0..n).filter(|q| self.is_accepting(*q)).collect();
        self.dist = distances_to(n, targets, |v| pred[v].clone());
        self.alive = self.dist.iter().map(Option::is_some).collect();
    }

    /// Unfolds one more layer at a time until `F_A` is nonempty, nothing new
    /// appears, or `h_max` is reached.
    pub fn ensure_accepting(&mut self, h_max: usize) -> Extension {
        loop {
            if self.accepting_count() > 0 {
                return Extension::Accepting(self.horizon);
            }
            if self.horizon >= h_max {
                return Extension::Budget;
            }
            let added = self.extend();
            self.refresh();
            if added == 0 && self.accepting_count() == 0 {
                return Extension::Saturated;
            }
        }
    }

    /// Adds one layer and recomputes values.
    pub fn grow(&mut self) -> usize {
        let added = self.extend();
        self.refresh();
        added
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn members(&self) -> &[AgentId] {
        &self.members
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_alive(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn state(&self, q: usize) -> &AState {
        &self.states[q]
    }

    pub fn init(&self) -> usize {
        0
    }

    pub fn depth(&self, q: usize) -> usize {
        self.depth[q]
    }

    pub fn is_expanded(&self, q: usize) -> bool {
        self.expanded[q]
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        q != 0 && self.tracked_accepting(q)
    }

    pub fn accepting_count(&self) -> usize {
        (1..self.states.len()).filter(|q| self.tracked_accepting(*q)).count()
    }

    /// Transitions out of `q` (empty for unexpanded states).
    pub fn edges(&self, q: usize) -> &[(Cube, usize)] {
        &self.edges[q]
    }

    pub fn is_alive(&self, q: usize) -> bool {
        self.alive[q]
    }

    /// Whether `q` can reach an unexpanded state; such states may turn out
    /// to be useful at a larger horizon.
    pub fn open_states(&self) -> Vec<bool> {
        let n = self.states.len();
        let mut pred = vec![Vec::new(); n];
        for (q, es) in self.edges.iter().enumerate() {
            for (_, d) in es {
                pred[*d].push(q);
            }
        }
        let targets: Vec<usize> = (0..n).filter(|q| !self.expanded[*q]).collect();
        distances_to(n, targets, |v| pred[v].clone()).into_iter().map(|d| d.is_some()).collect()
    }

    pub fn value(&self, q: usize) -> Value {
        Value { k: self.states[q].k, neg_dist: self.dist[q].map(|d| -(d as i64)) }
    }

    /// Index of an existing state.
    pub fn find(&self, s: &AState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// A copy without the states that cannot reach `F_A`. The initial state is
    /// kept only when it can.
    pub fn prune_dead(&self) -> IntersectionAutomaton {
        let keep: Vec<usize> = (0..self.states.len()).filter(|q| self.alive[*q]).collect();
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let mut out = IntersectionAutomaton {
            alphabet: self.alphabet.clone(),
            members: self.members.clone(),
            accepting_comp: self.accepting_comp.clone(),
            states: Vec::new(),
            index: HashMap::new(),
            depth: Vec::new(),
            expanded: Vec::new(),
            edges: Vec::new(),
            horizon: self.horizon,
            moves: self.moves.clone(),
            alive: Vec::new(),
            dist: Vec::new(),
        };
        for q in &keep {
            out.add_state(self.states[*q].clone(), self.depth[*q]);
            let i = out.states.len() - 1;
            out.expanded[i] = self.expanded[*q];
            out.edges[i] = self.edges[*q].iter().filter_map(|(c, d)| remap.get(d).map(|d2| (*c, *d2))).collect();
        }
        out.refresh();
        out
    }

    /// Renders the unfolding as a plain automaton (states named by tuple and
    /// counter) together with value annotations, for the exchange format.
    pub fn to_automaton(&self) -> (BuchiAutomaton, BTreeMap<usize, (u32, Option<i64>)>) {
        let names = self
            .states
            .iter()
            .map(|s| {
                let comps: Vec<String> = s.comps.iter().map(|c| c.to_string()).collect();
                format!("{}_k{}", comps.join("_"), s.k)
            })
            .collect();
        let mut transitions = Vec::new();
        for (q, es) in self.edges.iter().enumerate() {
            for (c, d) in es {
                transitions.push(Transition { src: q, label: *c, dst: *d });
            }
        }
        let aut = BuchiAutomaton::new(
            self.alphabet.letters.clone(),
            Alphabet::Powerset,
            names,
            0,
            (0..self.states.len()).filter(|q| self.is_accepting(*q)),
            transitions,
        )
        .expect("intersection is well formed");
        let values = (0..self.states.len()).map(|q| (q, (self.states[q].k, self.value(q).neg_dist))).collect();
        (aut, values)
    }
}

/// Breadth-first layers of the unfolding (for checks): `layers[j]` holds the
/// states whose minimum depth is `j`.
pub fn layers(a: &IntersectionAutomaton) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut dist = vec![usize::MAX; a.num_states()];
    dist[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(q) = queue.pop_front() {
        if out.len() <= dist[q] {
            out.resize(dist[q] + 1, Vec::new());
        }
        out[dist[q]].push(q);
        for (_, d) in a.edges(q) {
            if dist[*d] == usize::MAX {
                dist[*d] = dist[q] + 1;
                queue.push_back(*d);
            }
        }
    }
    out
}
