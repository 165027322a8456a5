//! Bounded product of a class's transition systems with its intersection
//! automaton, and plan extraction.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::agent::{Event, TransitionSystem};
use crate::automata::symbol::symbol_cmp;
use crate::automata::AgentId;
use crate::intersection::{IntersectionAutomaton, Value};

/// One class member as seen by the product: its model and current state.
#[derive(Debug, Clone, Copy)]
pub struct Agent<'a> {
    pub id: AgentId,
    pub ts: &'a TransitionSystem,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PState {
    pub states: Vec<usize>,
    pub q: usize,
}

/// A path from the initial product state: `states[j] -symbols[j]-> states[j+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanPath {
    pub states: Vec<usize>,
    pub symbols: Vec<u64>,
}

impl PlanPath {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// One member's view of a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub states: Vec<usize>,
    pub events: Vec<Event>,
    /// Task-automaton states along the plan.
    pub run: Vec<usize>,
}

/// Outcome of planning with horizon extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Planning {
    Found(PlanPath),
    /// Every reachable product state is expanded but the search ran into the
    /// edge of the intersection automaton; a deeper automaton may help.
    NeedsDeeperAutomaton,
    /// No plan exists for any horizon.
    Infeasible,
    /// `H` reached its cap.
    Budget,
}

#[derive(Debug)]
pub struct ProductSystem<'a> {
    a: &'a IntersectionAutomaton,
    agents: Vec<Agent<'a>>,
    // class bits of L(s) per member and state
    labels: Vec<Vec<u64>>,
    a_open: Vec<bool>,
    states: Vec<PState>,
    index: HashMap<PState, usize>,
    depth: Vec<usize>,
    expanded: Vec<bool>,
    edges: Vec<Vec<(u64, usize)>>,
    horizon: usize,
    boundary: bool,
}

fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

impl<'a> ProductSystem<'a> {
    /// Unfolds the product to depth `horizon`. `agents` must follow the member
    /// order of `a`.
    pub fn build(a: &'a IntersectionAutomaton, agents: Vec<Agent<'a>>, horizon: usize) -> ProductSystem<'a> {
        assert_eq!(
            agents.iter().map(|g| g.id).collect::<Vec<_>>(),
            a.members(),
            "agents must match the automaton's members"
        );
        let labels = agents
            .iter()
            .enumerate()
            .map(|(m, g)| {
                (0..g.ts.num_states())
                    .map(|s| {
                        g.ts.label(s).iter().filter_map(|x| a.alphabet.bit_of(x)).fold(0, |acc, b| acc | b)
                            & a.alphabet.own[m]
                    })
                    .collect()
            })
            .collect();
        let mut p = ProductSystem {
            a,
            labels,
            a_open: a.open_states(),
            states: Vec::new(),
            index: HashMap::new(),
            depth: Vec::new(),
            expanded: Vec::new(),
            edges: Vec::new(),
            horizon: 0,
            boundary: false,
            agents,
        };
        let init = PState { states: p.agents.iter().map(|g| g.state).collect(), q: a.init() };
        p.add_state(init, 0);
        for _ in 0..horizon {
            if p.grow() == 0 && p.is_saturated() {
                p.horizon = horizon;
                break;
            }
        }
        p
    }

    fn add_state(&mut self, s: PState, depth: usize) -> (usize, bool) {
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

    fn successors_of(&mut self, p: usize) -> Vec<(u64, PState)> {
        let src = self.states[p].clone();
        if !self.a.is_expanded(src.q) {
            self.boundary = true;
            return Vec::new();
        }
        let alpha = &self.a.alphabet;
        let mut out = Vec::new();
        for (cube, dq) in self.a.edges(src.q) {
            if !self.a.is_alive(*dq) {
                if self.a_open[*dq] {
                    self.boundary = true;
                }
                continue;
            }
            let mut stack: Vec<(usize, u64, Vec<usize>)> = vec![(0, 0, Vec::new())];
            while let Some((m, sym, next)) = stack.pop() {
                if m == self.agents.len() {
                    out.push((sym, PState { states: next, q: *dq }));
                    continue;
                }
                let s = src.states[m];
                let eps = alpha.silent[m];
                if cube.neg & eps == 0 {
                    for t in self.agents[m].ts.successors(s) {
                        let mut n = next.clone();
                        n.push(*t);
                        stack.push((m + 1, sym | eps, n));
                    }
                }
                if cube.pos & eps == 0 {
                    let own = alpha.own[m];
                    let must = cube.pos & own;
                    let avail = self.labels[m][s];
                    if must & !avail == 0 {
                        let mut n = next.clone();
                        n.push(s);
                        for x in submasks(avail & !cube.neg & !must) {
                            stack.push((m + 1, sym | must | x, n.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    /// Adds one layer; returns the number of new states.
    pub fn grow(&mut self) -> usize {
        let frontier: Vec<usize> =
            (0..self.states.len()).filter(|p| !self.expanded[*p] && self.depth[*p] == self.horizon).collect();
        let mut added = 0;
        for p in frontier {
            let mut edges = Vec::new();
            for (sym, s) in self.successors_of(p) {
                let (dst, new) = self.add_state(s, self.horizon + 1);
                added += usize::from(new);
                edges.push((sym, dst));
            }
            edges.sort_by(|x, y| x.1.cmp(&y.1).then(symbol_cmp(x.0, y.0)));
            edges.dedup();
            self.edges[p] = edges;
            self.expanded[p] = true;
        }
        self.horizon += 1;
        added
    }

    /// No unexpanded states remain: a larger horizon adds nothing.
    pub fn is_saturated(&self) -> bool {
        self.expanded.iter().all(|e| *e)
    }

    /// Whether some expansion was cut short by the edge of the intersection
    /// automaton.
    pub fn touched_boundary(&self) -> bool {
        self.boundary
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn state(&self, p: usize) -> &PState {
        &self.states[p]
    }

    pub fn depth(&self, p: usize) -> usize {
        self.depth[p]
    }

    pub fn edges(&self, p: usize) -> &[(u64, usize)] {
        &self.edges[p]
    }

    pub fn agents(&self) -> &[Agent<'a>] {
        &self.agents
    }

    pub fn automaton(&self) -> &IntersectionAutomaton {
        self.a
    }

    pub fn value(&self, p: usize) -> Value {
        self.a.value(self.states[p].q)
    }

    /// Whether member `m` takes a non-silent step in `sym`; providing the
    /// empty service set counts.
    pub fn serves(&self, m: usize, sym: u64) -> bool {
        sym & self.a.alphabet.silent[m] == 0
    }

    /// Shortest path to a maximally progressive state among those reachable
    /// through a non-silent step of member `prio`. Ties: shorter path, then
    /// lower state index.
    pub fn find_plan(&self, prio: usize) -> Option<PlanPath> {
        let n = self.states.len();
        let mut parent: Vec<Option<(usize, u64)>> = vec![None; 2 * n];
        let mut seen = vec![false; 2 * n];
        let mut dist = vec![usize::MAX; 2 * n];
        seen[0] = true;
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            let (p, flag) = (node / 2, node % 2);
            for (sym, d) in &self.edges[p] {
                let f = flag | usize::from(self.serves(prio, *sym));
                let nd = 2 * d + f;
                if !seen[nd] {
                    seen[nd] = true;
                    dist[nd] = dist[node] + 1;
                    parent[nd] = Some((node, *sym));
                    queue.push_back(nd);
                }
            }
        }
        let v0 = self.value(0);
        let best = (0..n)
            .filter(|p| seen[2 * p + 1] && self.value(*p) > v0)
            .min_by(|x, y| self.value(*y).cmp(&self.value(*x)).then(dist[2 * x + 1].cmp(&dist[2 * y + 1])))?;
        let mut states = vec![best];
        let mut symbols = Vec::new();
        let mut node = 2 * best + 1;
        while let Some((prev, sym)) = parent[node] {
            states.push(prev / 2);
            symbols.push(sym);
            node = prev;
        }
        states.reverse();
        symbols.reverse();
        Some(PlanPath { states, symbols })
    }

    /// Trace and run prefix of member `m` along `plan`.
    pub fn project(&self, plan: &PlanPath, m: usize) -> Projection {
        let comps = |p: usize| self.a.state(self.states[p].q).comps[m];
        Projection {
            states: plan.states.iter().map(|p| self.states[*p].states[m]).collect(),
            events: plan
                .symbols
                .iter()
                .map(|sym| match self.a.alphabet.event_of(m, *sym) {
                    None => Event::Silent,
                    Some(s) => Event::Serve(s),
                })
                .collect(),
            run: plan.states.iter().map(|p| comps(*p)).collect(),
        }
    }

    /// Adds layers until a plan exists, the product saturates, or the horizon
    /// reaches `h_max`.
    pub fn plan_with_extension(&mut self, prio: usize, h_max: usize) -> Planning {
        loop {
            if let Some(plan) = self.find_plan(prio) {
                return Planning::Found(plan);
            }
            if self.is_saturated() {
                return if self.boundary { Planning::NeedsDeeperAutomaton } else { Planning::Infeasible };
            }
            if self.horizon >= h_max {
                return Planning::Budget;
            }
            self.grow();
        }
    }
}

/// Services named in a joint symbol of the class alphabet.
pub fn services_of(a: &IntersectionAutomaton, sym: u64) -> BTreeSet<String> {
    (0..a.alphabet.letters.len())
        .filter(|i| sym & (1 << i) != 0)
        .map(|i| &a.alphabet.letters[i])
        .filter(|l| !l.is_silent())
        .map(|l| l.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::BuchiAutomaton;
    use crate::backtrack::Forbidden;
    use crate::intersection::Member;
    use crate::ltl::{parse_formula, translate};
    use std::collections::BTreeMap;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn aut(text: &str, atoms: &[&str]) -> BuchiAutomaton {
        translate(&parse_formula(text, &set(atoms)).unwrap())
    }

    /// A line of cells `c0 … c{n-1}`; `labels` gives services per cell.
    fn line(n: usize, labels: &[(usize, &[&str])], services: &[&str]) -> TransitionSystem {
        let states: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((states[i].clone(), states[i].clone()));
            if i + 1 < n {
                edges.push((states[i].clone(), states[i + 1].clone()));
                edges.push((states[i + 1].clone(), states[i].clone()));
            }
        }
        let mut lab = BTreeMap::new();
        for (i, l) in labels {
            lab.insert(states[*i].clone(), set(l));
        }
        TransitionSystem::new(states.clone(), "c0", &edges, set(services), lab).unwrap()
    }

    #[test]
    fn zero_horizon_has_only_the_initial_state() {
        let b = aut("F a", &["a"]);
        let svc = set(&["a"]);
        let ts = line(1, &[(0, &["a"])], &["a"]);
        let m = [Member { agent: AgentId(0), automaton: &b, state: b.init(), services: &svc }];
        let a = IntersectionAutomaton::build(&m, &Forbidden::default(), 2);
        let p = ProductSystem::build(&a, vec![Agent { id: AgentId(0), ts: &ts, state: 0 }], 0);
        assert_eq!(p.num_states(), 1);
        assert_eq!(p.num_transitions(), 0);
        assert_eq!(p.find_plan(0), None);
    }

    #[test]
    fn serves_where_the_service_is_offered() {
        let b = aut("F a", &["a"]);
        let svc = set(&["a"]);
        let ts = line(1, &[(0, &["a"])], &["a"]);
        let m = [Member { agent: AgentId(0), automaton: &b, state: b.init(), services: &svc }];
        let a = IntersectionAutomaton::build(&m, &Forbidden::default(), 2);
        let p = ProductSystem::build(&a, vec![Agent { id: AgentId(0), ts: &ts, state: 0 }], 3);
        // the maximal value sits one step past acceptance, where the counter
        // has moved on
        let plan = p.find_plan(0).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(p.value(*plan.states.last().unwrap()).k, 2);
        let pr = p.project(&plan, 0);
        assert_eq!(pr.events[0], Event::serve(&["a"]));
        assert!(b.is_accepting(pr.run[1]));
    }

    #[test]
    fn corridor_needs_horizon_extension() {
        let b = aut("F a", &["a"]);
        let svc = set(&["a"]);
        let ts = line(7, &[(6, &["a"])], &["a"]);
        let m = [Member { agent: AgentId(0), automaton: &b, state: b.init(), services: &svc }];
        let a = IntersectionAutomaton::build(&m, &Forbidden::default(), 2);
        let mut p = ProductSystem::build(&a, vec![Agent { id: AgentId(0), ts: &ts, state: 0 }], 5);
        assert_eq!(p.find_plan(0), None);
        match p.plan_with_extension(0, 12) {
            Planning::Found(plan) => assert_eq!(plan.len(), 7),
            other => panic!("{other:?}"),
        }
        assert_eq!(p.horizon(), 7);
    }

    #[test]
    fn unreachable_service_is_infeasible() {
        let b = aut("F a", &["a"]);
        let svc = set(&["a"]);
        let ts = line(3, &[], &["a"]);
        let m = [Member { agent: AgentId(0), automaton: &b, state: b.init(), services: &svc }];
        let a = IntersectionAutomaton::build(&m, &Forbidden::default(), 2);
        let mut p = ProductSystem::build(&a, vec![Agent { id: AgentId(0), ts: &ts, state: 0 }], 2);
        assert_eq!(p.plan_with_extension(0, 12), Planning::Infeasible);
    }

    #[test]
    fn first_example_pair_serves_jointly() {
        let atoms = ["a", "b"];
        let b1 = aut("a & X (a & b)", &atoms);
        let b2 = aut("b & X (b & a)", &atoms);
        let (s1, s2) = (set(&["a"]), set(&["b"]));
        let t1 = line(2, &[(0, &["a"]), (1, &["a"])], &["a"]);
        let t2 = line(2, &[(0, &["b"]), (1, &["b"])], &["b"]);
        let m = [
            Member { agent: AgentId(0), automaton: &b1, state: b1.init(), services: &s1 },
            Member { agent: AgentId(1), automaton: &b2, state: b2.init(), services: &s2 },
        ];
        let mut a = IntersectionAutomaton::build(&m, &Forbidden::default(), 3);
        a.ensure_accepting(6);
        let agents = vec![Agent { id: AgentId(0), ts: &t1, state: 0 }, Agent { id: AgentId(1), ts: &t2, state: 0 }];
        let p = ProductSystem::build(&a, agents, 5);
        assert!((0..p.num_states()).any(|x| b1.is_accepting(a.state(p.state(x).q).comps[0])));
        let plan = p.find_plan(0).unwrap();
        let (e1, e2) = (p.project(&plan, 0).events, p.project(&plan, 1).events);
        // the first step where both serve provides a and b together
        let joint = e1.iter().zip(&e2).find(|(x, y)| !x.is_silent() && !y.is_silent()).unwrap();
        assert_eq!(joint, (&Event::serve(&["a"]), &Event::serve(&["b"])));
    }

    #[test]
    fn submask_enumeration() {
        let all: Vec<u64> = submasks(0b101).collect();
        assert_eq!(all, vec![0b101, 0b100, 0b001, 0]);
        assert_eq!(submasks(0).collect::<Vec<_>>(), vec![0]);
    }
}
