//! LTL to Büchi translation: negation normal form, the on-the-fly tableau
//! (one generalized acceptance set per Until), counter degeneralization, then
//! trimming and a bisimulation quotient to keep automata small. Accepting
//! states that lie on no cycle are demoted, so every accepting state marks
//! recurring progress.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::Formula;
use crate::automata::graph::strongly_connected_components;
use crate::automata::symbol::{simplify_cubes, Cube, Letter};
use crate::automata::{Alphabet, BuchiAutomaton, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    Until(usize, usize),
    Release(usize, usize),
}

#[derive(Default)]
struct Table {
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
}

impl Table {
    fn intern(&mut self, n: Node) -> usize {
        if let Some(i) = self.index.get(&n) {
            return *i;
        }
        let i = self.nodes.len();
        self.nodes.push(n);
        self.index.insert(n, i);
        i
    }

    fn and(&mut self, a: usize, b: usize) -> usize {
        match (self.nodes[a], self.nodes[b]) {
            (Node::False, _) | (_, Node::False) => self.intern(Node::False),
            (Node::True, _) => b,
            (_, Node::True) => a,
            _ if a == b => a,
            _ => self.intern(Node::And(a, b)),
        }
    }

    fn or(&mut self, a: usize, b: usize) -> usize {
        match (self.nodes[a], self.nodes[b]) {
            (Node::True, _) | (_, Node::True) => self.intern(Node::True),
            (Node::False, _) => b,
            (_, Node::False) => a,
            _ if a == b => a,
            _ => self.intern(Node::Or(a, b)),
        }
    }

    fn nnf(&mut self, f: &Formula, neg: bool, atoms: &[String]) -> usize {
        match f {
            Formula::True => self.intern(if neg { Node::False } else { Node::True }),
            Formula::False => self.intern(if neg { Node::True } else { Node::False }),
            Formula::Atom(a) => {
                let i = atoms.iter().position(|x| x == a).expect("atom collected");
                self.intern(Node::Lit(i, !neg))
            }
            Formula::Not(g) => self.nnf(g, !neg, atoms),
            Formula::And(a, b) | Formula::Or(a, b) => {
                let x = self.nnf(a, neg, atoms);
                let y = self.nnf(b, neg, atoms);
                if matches!(f, Formula::And(..)) != neg {
                    self.and(x, y)
                } else {
                    self.or(x, y)
                }
            }
            Formula::Next(g) => {
                let x = self.nnf(g, neg, atoms);
                self.intern(Node::Next(x))
            }
            Formula::Until(a, b) => {
                let x = self.nnf(a, neg, atoms);
                let y = self.nnf(b, neg, atoms);
                self.intern(if neg { Node::Release(x, y) } else { Node::Until(x, y) })
            }
            Formula::Eventually(g) | Formula::Always(g) => {
                let x = self.nnf(g, neg, atoms);
                let eventually = matches!(f, Formula::Eventually(_)) != neg;
                if eventually {
                    let t = self.intern(Node::True);
                    self.intern(Node::Until(t, x))
                } else {
                    let ff = self.intern(Node::False);
                    self.intern(Node::Release(ff, x))
                }
            }
        }
    }

    /// Until subformulas in pre-order from `root`, outermost first.
    fn untils(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if !seen.insert(i) {
                continue;
            }
            match self.nodes[i] {
                Node::Until(a, b) => {
                    out.push(i);
                    stack.push(b);
                    stack.push(a);
                }
                Node::And(a, b) | Node::Or(a, b) | Node::Release(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                Node::Next(a) => stack.push(a),
                _ => {}
            }
        }
        out
    }
}

const INIT: usize = usize::MAX;

#[derive(Clone)]
struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<usize>,
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

struct Done {
    incoming: BTreeSet<usize>,
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

fn tableau(table: &Table, root: usize) -> Vec<Done> {
    let mut done: Vec<Done> = Vec::new();
    let mut stack = vec![Pending {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([root]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];
    while let Some(mut n) = stack.pop() {
        let Some(eta) = n.new.pop_first() else {
            if let Some(d) = done.iter_mut().find(|d| d.old == n.old && d.next == n.next) {
                d.incoming.extend(n.incoming);
            } else {
                let id = done.len();
                stack.push(Pending {
                    incoming: BTreeSet::from([id]),
                    new: n.next.clone(),
                    old: BTreeSet::new(),
                    next: BTreeSet::new(),
                });
                done.push(Done { incoming: n.incoming, old: n.old, next: n.next });
            }
            continue;
        };
        if n.old.contains(&eta) {
            stack.push(n);
            continue;
        }
        match table.nodes[eta] {
            Node::False => {}
            Node::True => {
                n.old.insert(eta);
                stack.push(n);
            }
            Node::Lit(a, p) => {
                let clash = table.index.get(&Node::Lit(a, !p)).is_some_and(|c| n.old.contains(c));
                if !clash {
                    n.old.insert(eta);
                    stack.push(n);
                }
            }
            Node::And(a, b) => {
                n.old.insert(eta);
                n.new.insert(a);
                n.new.insert(b);
                stack.push(n);
            }
            Node::Next(a) => {
                n.old.insert(eta);
                n.next.insert(a);
                stack.push(n);
            }
            Node::Or(a, b) | Node::Until(a, b) | Node::Release(a, b) => {
                n.old.insert(eta);
                let mut left = n.clone();
                let mut right = n;
                match table.nodes[eta] {
                    Node::Or(..) => {
                        left.new.insert(a);
                        right.new.insert(b);
                    }
                    Node::Until(..) => {
                        left.new.insert(a);
                        left.next.insert(eta);
                        right.new.insert(b);
                    }
                    _ => {
                        left.new.insert(b);
                        left.next.insert(eta);
                        right.new.insert(a);
                        right.new.insert(b);
                    }
                }
                stack.push(right);
                stack.push(left);
            }
        }
    }
    done
}

/// An explicit automaton under construction: labelled edges and acceptance.
struct Raw {
    n: usize,
    init: usize,
    accepting: Vec<bool>,
    edges: Vec<(usize, Cube, usize)>,
}

fn degeneralize(table: &Table, root: usize, nodes: &[Done]) -> Raw {
    // GBA states: 0 is the initial state, node i is state i + 1
    let label = |d: &Done| {
        let mut c = Cube::TOP;
        for i in &d.old {
            if let Node::Lit(a, p) = table.nodes[*i] {
                if p {
                    c.pos |= 1 << a;
                } else {
                    c.neg |= 1 << a;
                }
            }
        }
        c
    };
    let mut succ: Vec<Vec<(Cube, usize)>> = vec![Vec::new(); nodes.len() + 1];
    for (i, d) in nodes.iter().enumerate() {
        let c = label(d);
        for p in &d.incoming {
            let src = if *p == INIT { 0 } else { p + 1 };
            succ[src].push((c, i + 1));
        }
    }
    let untils = table.untils(root);
    let m = untils.len();
    let in_set = |s: usize, c: usize| -> bool {
        if s == 0 {
            return false;
        }
        let d = &nodes[s - 1];
        let u = untils[c];
        let Node::Until(_, b) = table.nodes[u] else { unreachable!() };
        !d.old.contains(&u) || d.old.contains(&b)
    };

    let layers = m.max(1);
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert((0, 0), 0);
    order.push((0, 0));
    queue.push_back((0, 0));
    let mut edges = Vec::new();
    while let Some((s, c)) = queue.pop_front() {
        let from = index[&(s, c)];
        let c2 = if m > 0 && in_set(s, c) { (c + 1) % layers } else { c };
        for (cube, t) in &succ[s] {
            let key = (*t, c2);
            let to = *index.entry(key).or_insert_with(|| {
                order.push(key);
                queue.push_back(key);
                order.len() - 1
            });
            edges.push((from, *cube, to));
        }
    }
    let accepting = order
        .iter()
        .map(|(s, c)| *s != 0 && *c == 0 && (m == 0 || in_set(*s, 0)))
        .collect();
    Raw { n: order.len(), init: 0, accepting, edges }
}

/// Drops states that cannot reach an accepting cycle (the initial state is
/// always kept). With `demote`, also clears acceptance on states that lie on
/// no cycle: such a state is seen at most once per run, so the language is
/// unchanged.
fn trim(raw: Raw, demote: bool) -> Raw {
    let n = raw.n;
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for (s, _, t) in &raw.edges {
        succ[*s].push(*t);
        pred[*t].push(*s);
    }
    let comp = strongly_connected_components(n, |v| succ[v].clone());
    let accepting: Vec<bool> = (0..n)
        .map(|v| raw.accepting[v] && (!demote || succ[v].iter().any(|w| comp[*w] == comp[v])))
        .collect();
    let mut live = vec![false; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if accepting[v] && succ[v].iter().any(|w| comp[*w] == comp[v]) {
            live[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for p in &pred[v] {
            if !live[*p] {
                live[*p] = true;
                queue.push_back(*p);
            }
        }
    }
    live[raw.init] = true;
    let remap: Vec<Option<usize>> = {
        let mut next = 0;
        live.iter()
            .map(|l| {
                l.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    Raw {
        n: live.iter().filter(|l| **l).count(),
        init: remap[raw.init].expect("initial state kept"),
        accepting: (0..n).filter(|v| live[*v]).map(|v| accepting[v]).collect(),
        edges: raw
            .edges
            .iter()
            .filter_map(|(s, c, t)| Some((remap[*s]?, *c, remap[*t]?)))
            .collect(),
    }
}

/// Quotient by the coarsest acceptance-respecting bisimulation.
fn quotient(raw: Raw) -> Raw {
    let n = raw.n;
    let mut succ: Vec<Vec<(Cube, usize)>> = vec![Vec::new(); n];
    for (s, c, t) in &raw.edges {
        succ[*s].push((*c, *t));
    }
    let mut block: Vec<usize> = raw.accepting.iter().map(|a| usize::from(*a)).collect();
    let mut count = block.iter().collect::<BTreeSet<_>>().len();
    loop {
        let mut sigs: BTreeMap<(usize, BTreeSet<(Cube, usize)>), usize> = BTreeMap::new();
        let mut next = vec![0; n];
        for v in 0..n {
            let sig: BTreeSet<(Cube, usize)> = succ[v].iter().map(|(c, t)| (*c, block[*t])).collect();
            let len = sigs.len();
            next[v] = *sigs.entry((block[v], sig)).or_insert(len);
        }
        let new_count = sigs.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    // renumber blocks in BFS order from the initial state
    let mut id: Vec<Option<usize>> = vec![None; count];
    let mut reps: Vec<usize> = Vec::new();
    let mut queue = VecDeque::from([raw.init]);
    id[block[raw.init]] = Some(0);
    reps.push(raw.init);
    while let Some(v) = queue.pop_front() {
        let mut targets: Vec<usize> = succ[v].iter().map(|(_, t)| *t).collect();
        targets.sort_unstable();
        for t in targets {
            if id[block[t]].is_none() {
                id[block[t]] = Some(reps.len());
                reps.push(t);
                queue.push_back(t);
            }
        }
    }
    let mut edges: BTreeMap<(usize, usize), Vec<Cube>> = BTreeMap::new();
    for (i, v) in reps.iter().enumerate() {
        for (c, t) in &succ[*v] {
            let j = id[block[*t]].expect("reachable");
            edges.entry((i, j)).or_default().push(*c);
        }
    }
    Raw {
        n: reps.len(),
        init: 0,
        accepting: reps.iter().map(|v| raw.accepting[*v]).collect(),
        edges: edges
            .into_iter()
            .flat_map(|((s, t), cubes)| simplify_cubes(cubes).into_iter().map(move |c| (s, c, t)))
            .collect(),
    }
}

/// Translates `f` into a Büchi automaton over the formula's atoms.
pub fn translate(f: &Formula) -> BuchiAutomaton {
    let atoms: Vec<String> = f.atoms().into_iter().collect();
    let mut table = Table::default();
    let root = table.nnf(f, false, &atoms);
    let nodes = tableau(&table, root);
    // quotient first so that transient accepting states get the chance to
    // merge into an accepting cycle before acceptance is cleared
    let raw = quotient(trim(quotient(trim(degeneralize(&table, root, &nodes), false)), true));
    let letters = atoms.iter().map(|a| Letter::service(a.clone())).collect();
    BuchiAutomaton::new(
        letters,
        Alphabet::Powerset,
        (0..raw.n).map(|i| i.to_string()).collect(),
        raw.init,
        (0..raw.n).filter(|v| raw.accepting[*v]),
        raw.edges.into_iter().map(|(src, label, dst)| Transition { src, label, dst }).collect(),
    )
    .expect("tableau output is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::graph::accepts_lasso;
    use crate::ltl::{evaluate_lasso, parse_formula, Symbol};

    fn all_symbols(atoms: &[&str]) -> Vec<Symbol> {
        (0..1u32 << atoms.len())
            .map(|m| atoms.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, a)| a.to_string()).collect())
            .collect()
    }

    fn words(syms: &[Symbol], len: usize) -> Vec<Vec<Symbol>> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| syms.iter().map(move |s| [w.clone(), vec![s.clone()]].concat()))
                .collect();
        }
        out
    }

    fn masks(aut: &BuchiAutomaton, w: &[Symbol]) -> Vec<u64> {
        w.iter().map(|s| aut.mask_of(s.iter().map(String::as_str))).collect()
    }

    fn check(text: &str, atoms: &[&str]) {
        let decl: BTreeSet<String> = atoms.iter().map(|s| s.to_string()).collect();
        let f = parse_formula(text, &decl).unwrap();
        let aut = translate(&f);
        let syms = all_symbols(atoms);
        for p in 0..=2 {
            for l in 1..=2 {
                for pre in words(&syms, p) {
                    for lp in words(&syms, l) {
                        let want = evaluate_lasso(&f, &pre, &lp);
                        let got = accepts_lasso(&aut, &masks(&aut, &pre), &masks(&aut, &lp));
                        assert_eq!(got, want, "{text} on {pre:?} ({lp:?})^w");
                    }
                }
            }
        }
    }

    #[test]
    fn eventually_is_two_states() {
        let f = parse_formula("F a", &["a".to_string()].into()).unwrap();
        let aut = translate(&f);
        assert_eq!(aut.num_states(), 2);
        check("F a", &["a"]);
    }

    #[test]
    fn small_formulas_agree_with_semantics() {
        for text in [
            "a & X (a & b)",
            "a | !a",
            "G a",
            "G F a",
            "F G a",
            "a U b",
            "!(a U b)",
            "G (!a | b)",
            "G F a & G F b",
            "X X a",
            "false",
            "true",
            "(a U b) U a",
            "F (a & X !a)",
        ] {
            check(text, &["a", "b"]);
        }
    }

    #[test]
    fn unsatisfiable_formula_has_no_accepting_state() {
        let f = parse_formula("G a & F !a", &["a".to_string()].into()).unwrap();
        let aut = translate(&f);
        assert_eq!(aut.accepting_states().count(), 0);
    }
}
