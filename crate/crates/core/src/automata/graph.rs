//! Graph queries over automata: k-step reachability, hop distances, shortest
//! paths and accepting lassos.
//!
//! Distances count edges, with `distance(q, q) == 0`. Searches are breadth
//! first; successors are visited in ascending state order and, for equal
//! targets, in ascending symbol order, so every query is deterministic.

use std::collections::{BTreeSet, VecDeque};

use super::buchi::{BuchiAutomaton, Transition};
use super::symbol::{symbol_cmp, Letter};
use super::AutomatonError;

/// A finite path `q_0 σ_0 q_1 … σ_{m-1} q_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub states: Vec<usize>,
    pub symbols: Vec<u64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn last(&self) -> usize {
        *self.states.last().expect("paths are never empty")
    }

    fn single(q: usize) -> Path {
        Path { states: vec![q], symbols: Vec::new() }
    }

    fn append(&mut self, other: &Path) {
        debug_assert_eq!(self.last(), other.states[0]);
        self.states.extend_from_slice(&other.states[1..]);
        self.symbols.extend_from_slice(&other.symbols);
    }
}

/// A prefix from the initial state to an accepting state plus a closed walk
/// through that state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub prefix: Path,
    pub cycle: Path,
}

fn check_state(aut: &BuchiAutomaton, q: usize) -> Result<(), AutomatonError> {
    if q < aut.num_states() {
        Ok(())
    } else {
        Err(AutomatonError::UnknownState(q.to_string()))
    }
}

/// δ̂^k(q): the states reachable from `q` in exactly `k` steps.
pub fn reachable_in_k(aut: &BuchiAutomaton, q: usize, k: usize) -> Result<BTreeSet<usize>, AutomatonError> {
    check_state(aut, q)?;
    let mut cur: BTreeSet<usize> = BTreeSet::from([q]);
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for p in &cur {
            next.extend(aut.successors(*p));
        }
        if next.is_empty() {
            return Ok(next);
        }
        cur = next;
    }
    Ok(cur)
}

/// States reachable from `q` in at most `k` steps.
pub fn ball(aut: &BuchiAutomaton, q: usize, k: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([q]);
    let mut frontier = vec![q];
    for _ in 0..k {
        let mut next = Vec::new();
        for p in frontier {
            for s in aut.successors(p) {
                if seen.insert(s) {
                    next.push(s);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    seen
}

/// Hop distance from `q` to `q2`; `None` stands for ∞.
pub fn distance(aut: &BuchiAutomaton, q: usize, q2: usize) -> Result<Option<usize>, AutomatonError> {
    check_state(aut, q)?;
    check_state(aut, q2)?;
    Ok(bfs_distances(aut.num_states(), q, |p| aut.successors(p))[q2])
}

/// Single-source BFS distances over an arbitrary successor function.
pub fn bfs_distances<I>(n: usize, src: usize, mut succ: impl FnMut(usize) -> I) -> Vec<Option<usize>>
where
    I: IntoIterator<Item = usize>,
{
    let mut dist = vec![None; n];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(p) = queue.pop_front() {
        let d = dist[p].expect("queued states have a distance");
        for s in succ(p) {
            if dist[s].is_none() {
                dist[s] = Some(d + 1);
                queue.push_back(s);
            }
        }
    }
    dist
}

/// Multi-target distances: for every state, the hop count to the nearest
/// target, following `pred` backwards.
pub fn distances_to<I>(n: usize, targets: impl IntoIterator<Item = usize>, mut pred: impl FnMut(usize) -> I) -> Vec<Option<usize>>
where
    I: IntoIterator<Item = usize>,
{
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for t in targets {
        if dist[t].is_none() {
            dist[t] = Some(0);
            queue.push_back(t);
        }
    }
    while let Some(p) = queue.pop_front() {
        let d = dist[p].expect("queued states have a distance");
        for s in pred(p) {
            if dist[s].is_none() {
                dist[s] = Some(d + 1);
                queue.push_back(s);
            }
        }
    }
    dist
}

/// Representative symbol of a transition guard: the smallest member in
/// symbol order that is also in the alphabet.
fn representative(aut: &BuchiAutomaton, t: &Transition) -> Option<u64> {
    let full = aut.full();
    if aut.in_alphabet(t.label.pos) {
        return Some(t.label.pos);
    }
    t.label.symbols(full).filter(|s| aut.in_alphabet(*s)).min_by(|a, b| symbol_cmp(*a, *b))
}

/// Outgoing edges of `q` as `(dst, symbol)` pairs in canonical order.
fn edges(aut: &BuchiAutomaton, q: usize, filter: &mut impl FnMut(&Transition) -> bool) -> Vec<(usize, u64)> {
    let mut out: Vec<(usize, u64)> = aut
        .outgoing(q)
        .filter(|t| filter(t))
        .filter_map(|t| representative(aut, t).map(|s| (t.dst, s)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0).then(symbol_cmp(a.1, b.1)));
    out.dedup();
    out
}

/// Minimum-hop path from `q` to any state satisfying `target`, using only
/// transitions accepted by `filter`.
pub fn shortest_path(
    aut: &BuchiAutomaton,
    q: usize,
    mut target: impl FnMut(usize) -> bool,
    mut filter: impl FnMut(&Transition) -> bool,
) -> Option<Path> {
    if q >= aut.num_states() {
        return None;
    }
    if target(q) {
        return Some(Path::single(q));
    }
    let n = aut.num_states();
    let mut parent: Vec<Option<(usize, u64)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[q] = true;
    let mut queue = VecDeque::from([q]);
    while let Some(p) = queue.pop_front() {
        for (s, sym) in edges(aut, p, &mut filter) {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            parent[s] = Some((p, sym));
            if target(s) {
                return Some(unwind(&parent, q, s));
            }
            queue.push_back(s);
        }
    }
    None
}

fn unwind(parent: &[Option<(usize, u64)>], src: usize, mut at: usize) -> Path {
    let mut states = vec![at];
    let mut symbols = Vec::new();
    while at != src {
        let (p, sym) = parent[at].expect("BFS tree reaches the source");
        states.push(p);
        symbols.push(sym);
        at = p;
    }
    states.reverse();
    symbols.reverse();
    Path { states, symbols }
}

/// Silent markers present in the automaton's letters.
fn silent_mask(letters: &[Letter]) -> u64 {
    letters
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_silent())
        .fold(0, |m, (i, _)| m | (1 << i))
}

/// A symbol is silent when the alphabet has silent markers and the symbol
/// carries all of them.
pub fn is_silent_symbol(letters: &[Letter], sym: u64) -> bool {
    let markers = silent_mask(letters);
    markers != 0 && sym & markers == markers
}

/// Tarjan's algorithm; returns the component index of every node.
pub fn strongly_connected_components<I>(n: usize, mut succ: impl FnMut(usize) -> I) -> Vec<usize>
where
    I: IntoIterator<Item = usize>,
{
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    // explicit call stack: (node, successor list, cursor)
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, succ(root).into_iter().collect(), 0));
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succ(w).into_iter().collect(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(parent) = call.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("component root is on the stack");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// Finds an accepting lasso: a shortest path from the initial state to the
/// nearest suitable accepting state `q_f` and a closed walk through `q_f`.
/// With `require_non_silent`, the walk must read at least one non-silent
/// symbol.
pub fn find_accepting_lasso(aut: &BuchiAutomaton, require_non_silent: bool) -> Option<Lasso> {
    let n = aut.num_states();
    let reach = bfs_distances(n, aut.init(), |p| aut.successors(p));
    let comp = strongly_connected_components(n, |p| aut.successors(p));
    let letters = aut.letters();
    let full = aut.full();

    // non-silent symbol allowed by a transition, if any
    let non_silent = |t: &Transition| -> Option<u64> {
        if !is_silent_symbol(letters, t.label.pos) && aut.in_alphabet(t.label.pos) {
            return Some(t.label.pos);
        }
        t.label
            .symbols(full)
            .filter(|s| aut.in_alphabet(*s) && !is_silent_symbol(letters, *s))
            .min_by(|a, b| symbol_cmp(*a, *b))
    };

    // components with an internal edge (of the required kind)
    let mut cyclic = vec![false; n];
    for t in aut.transitions() {
        if comp[t.src] == comp[t.dst] && representative(aut, t).is_some() {
            let ok = !require_non_silent || non_silent(t).is_some();
            if ok {
                cyclic[comp[t.src]] = true;
            }
        }
    }
    let qf = aut
        .accepting_states()
        .filter(|q| reach[*q].is_some() && cyclic[comp[*q]])
        .min_by_key(|q| (reach[*q], *q))?;
    let c = comp[qf];
    let inside = |t: &Transition| comp[t.src] == c && comp[t.dst] == c;
    let prefix = shortest_path(aut, aut.init(), |q| q == qf, |_| true)?;

    if !require_non_silent {
        // shortest closed walk through qf
        let mut best: Option<Path> = None;
        for t in aut.outgoing(qf).filter(|t| inside(t)) {
            let Some(sym) = representative(aut, t) else { continue };
            if let Some(back) = shortest_path(aut, t.dst, |q| q == qf, |u| inside(u)) {
                let mut cycle = Path { states: vec![qf, t.dst], symbols: vec![sym] };
                cycle.append(&back);
                if best.as_ref().is_none_or(|b| cycle.len() < b.len()) {
                    best = Some(cycle);
                }
            }
        }
        return best.map(|cycle| Lasso { prefix, cycle });
    }
    // nearest non-silent edge inside the component, measured from qf
    let within = bfs_distances(n, qf, |p| {
        aut.outgoing(p).filter(|t| inside(t)).map(|t| t.dst).collect::<Vec<_>>()
    });
    let (t, sym) = aut
        .transitions()
        .iter()
        .filter(|t| inside(t))
        .filter_map(|t| non_silent(t).map(|s| (*t, s)))
        .filter(|(t, _)| within[t.src].is_some())
        .min_by_key(|(t, _)| (within[t.src], t.src, t.dst))?;
    let mut cycle = shortest_path(aut, qf, |q| q == t.src, |u| inside(u)).expect("same component");
    cycle.append(&Path { states: vec![t.src, t.dst], symbols: vec![sym] });
    let back = shortest_path(aut, t.dst, |q| q == qf, |u| inside(u)).expect("same component");
    cycle.append(&back);
    Some(Lasso { prefix, cycle })
}

/// Whether the automaton accepts the ultimately periodic word
/// `prefix · loop^ω`. Symbols are masks over the automaton's letters.
pub fn accepts_lasso(aut: &BuchiAutomaton, prefix: &[u64], looped: &[u64]) -> bool {
    assert!(!looped.is_empty(), "loop must be nonempty");
    let len = prefix.len() + looped.len();
    let letter_at = |pos: usize| if pos < prefix.len() { prefix[pos] } else { looped[pos - prefix.len()] };
    let next_pos = |pos: usize| if pos + 1 < len { pos + 1 } else { prefix.len() };
    let nq = aut.num_states();
    let node = |q: usize, pos: usize| q * len + pos;
    let succ = |v: usize| -> Vec<usize> {
        let (q, pos) = (v / len, v % len);
        aut.post(q, letter_at(pos)).into_iter().map(|q2| node(q2, next_pos(pos))).collect()
    };
    let total = nq * len;
    let reach = bfs_distances(total, node(aut.init(), 0), succ);
    let comp = strongly_connected_components(total, succ);
    (0..total).any(|v| {
        let q = v / len;
        reach[v].is_some() && aut.is_accepting(q) && succ(v).into_iter().any(|w| comp[w] == comp[v])
    })
}
