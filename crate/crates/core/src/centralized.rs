//! Offline team solution: static dependency classes, one synchronized product
//! per class with full Büchi acceptance, and accepting-lasso search.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::agent::{team_word, Event, Trace};
use crate::automata::graph::find_accepting_lasso;
use crate::automata::symbol::{symbol_cmp, Cube};
use crate::automata::{AgentId, Alphabet, BuchiAutomaton, Transition};
use crate::backtrack::Forbidden;
use crate::dependency::{agent_bit, dependency_partition};
use crate::engine::Problem;
use crate::intersection::{component_moves, ClassAlphabet, Member, Move};
use crate::ltl::evaluate_lasso;

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CentralizedError {
    #[error("team product exceeds the cap of {cap} states (joint agent states: {bound})")]
    Budget { cap: usize, bound: u128 },
}

/// Classes of the closure of the dependency sets over all states.
pub fn static_classes(problem: &Problem) -> Vec<Vec<AgentId>> {
    let masks: Vec<u64> = (0..problem.len())
        .map(|i| problem.dependency_set(i).into_iter().fold(0, |m, a| m | agent_bit(a)))
        .collect();
    let ordering: Vec<AgentId> = (0..problem.len()).map(AgentId).collect();
    dependency_partition(&masks, &ordering)
}

/// Number of joint agent states of a class.
pub fn size_bound(problem: &Problem, class: &[AgentId]) -> u128 {
    class.iter().map(|a| problem.task(a.0).ts.num_states() as u128).product()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TeamState {
    s: Vec<usize>,
    q: Vec<usize>,
    // member whose next accepting firing is awaited
    c: usize,
    // the counter just wrapped around
    wrapped: bool,
}

/// The synchronized product of a class's transition systems and task
/// automata. Acceptance: every member, in turn, fires into an accepting
/// state of its task automaton.
#[derive(Debug, Clone)]
pub struct TeamProduct {
    pub alphabet: ClassAlphabet,
    members: Vec<AgentId>,
    states: Vec<TeamState>,
    edges: Vec<Vec<(u64, usize)>>,
}

/// One agent's part of a team solution: `prefix` leads to the loop point and
/// `cycle` returns to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentLasso {
    pub agent: AgentId,
    pub prefix: Trace,
    pub cycle: Trace,
}

impl TeamProduct {
    pub fn build(problem: &Problem, class: &[AgentId], cap: usize) -> Result<TeamProduct, CentralizedError> {
        let bound = size_bound(problem, class);
        if bound > cap as u128 {
            return Err(CentralizedError::Budget { cap, bound });
        }
        let members: Vec<Member> = class
            .iter()
            .map(|a| {
                let t = problem.task(a.0);
                Member { agent: *a, automaton: &t.automaton, state: t.automaton.init(), services: t.ts.services() }
            })
            .collect();
        let alphabet = ClassAlphabet::new(&members);
        let none = Forbidden::default();
        let moves: Vec<Vec<Vec<Move>>> = members
            .iter()
            .enumerate()
            .map(|(m, mem)| {
                (0..mem.automaton.num_states()).map(|q| component_moves(&alphabet, m, mem, q, &none)).collect()
            })
            .collect();
        let labels: Vec<Vec<u64>> = class
            .iter()
            .enumerate()
            .map(|(m, a)| {
                let ts = &problem.task(a.0).ts;
                (0..ts.num_states())
                    .map(|s| ts.label(s).iter().filter_map(|x| alphabet.bit_of(x)).fold(0, |acc, b| acc | b) & alphabet.own[m])
                    .collect()
            })
            .collect();

        let n = class.len();
        let init = TeamState {
            s: class.iter().map(|a| problem.task(a.0).ts.init()).collect(),
            q: members.iter().map(|m| m.state).collect(),
            c: 0,
            wrapped: false,
        };
        let mut states = vec![init.clone()];
        let mut index = HashMap::from([(init, 0usize)]);
        let mut edges: Vec<Vec<(u64, usize)>> = vec![Vec::new()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            let src = states[x].clone();
            let mut out: Vec<(u64, TeamState)> = Vec::new();
            // joint task-automaton moves
            let mut stack: Vec<(usize, Cube, Vec<usize>)> = vec![(0, Cube::TOP, Vec::new())];
            while let Some((m, cube, qs)) = stack.pop() {
                if m < n {
                    for mv in &moves[m][src.q[m]] {
                        if let Some(c) = cube.conjoin(&mv.cube) {
                            let mut next = qs.clone();
                            next.push(mv.dst);
                            stack.push((m + 1, c, next));
                        }
                    }
                    continue;
                }
                // agent moves consistent with the joint guard
                let mut opts: Vec<(u64, Vec<usize>)> = vec![(0, Vec::new())];
                for (m, a) in class.iter().enumerate() {
                    let ts = &problem.task(a.0).ts;
                    let s = src.s[m];
                    let eps = alphabet.silent[m];
                    let mut next_opts = Vec::new();
                    for (sym, ss) in &opts {
                        if cube.neg & eps == 0 {
                            for t in ts.successors(s) {
                                let mut v = ss.clone();
                                v.push(*t);
                                next_opts.push((sym | eps, v));
                            }
                        }
                        if cube.pos & eps == 0 {
                            let must = cube.pos & alphabet.own[m];
                            let avail = labels[m][s];
                            if must & !avail == 0 {
                                let free = avail & !cube.neg & !must;
                                let mut x = free;
                                loop {
                                    let mut v = ss.clone();
                                    v.push(s);
                                    next_opts.push((sym | must | x, v));
                                    if x == 0 {
                                        break;
                                    }
                                    x = (x - 1) & free;
                                }
                            }
                        }
                    }
                    opts = next_opts;
                }
                for (sym, ss) in opts {
                    let fired = sym & alphabet.silent[src.c] == 0;
                    let acc = members[src.c].automaton.is_accepting(qs[src.c]);
                    let (c, wrapped) = if fired && acc { ((src.c + 1) % n, src.c + 1 == n) } else { (src.c, false) };
                    out.push((sym, TeamState { s: ss, q: qs.clone(), c, wrapped }));
                }
            }
            let mut es = Vec::new();
            for (sym, st) in out {
                let d = match index.get(&st) {
                    Some(d) => *d,
                    None => {
                        if states.len() >= cap {
                            return Err(CentralizedError::Budget { cap, bound });
                        }
                        let d = states.len();
                        index.insert(st.clone(), d);
                        states.push(st);
                        edges.push(Vec::new());
                        queue.push_back(d);
                        d
                    }
                };
                es.push((sym, d));
            }
            es.sort_by(|a, b| a.1.cmp(&b.1).then(symbol_cmp(a.0, b.0)));
            es.dedup();
            edges[x] = es;
        }
        Ok(TeamProduct { alphabet, members: class.to_vec(), states, edges })
    }

    pub fn members(&self) -> &[AgentId] {
        &self.members
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// The product as a Büchi automaton over the class alphabet with one
    /// transition per joint symbol.
    pub fn to_automaton(&self) -> BuchiAutomaton {
        let full = self.alphabet.full();
        let transitions = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(src, es)| es.iter().map(move |(sym, dst)| Transition { src, label: Cube::point(*sym, full), dst: *dst }))
            .collect();
        BuchiAutomaton::new(
            self.alphabet.letters.clone(),
            Alphabet::Powerset,
            (0..self.states.len()).map(|i| i.to_string()).collect(),
            0,
            (0..self.states.len()).filter(|i| self.states[*i].wrapped),
            transitions,
        )
        .expect("team product is well formed")
    }

    /// An accepting lasso projected onto the members, or `None` when the
    /// class has no solution.
    pub fn solve(&self) -> Option<Vec<AgentLasso>> {
        let lasso = find_accepting_lasso(&self.to_automaton(), true)?;
        let trace = |m: usize, states: &[usize], symbols: &[u64]| Trace {
            states: states.iter().map(|x| self.states[*x].s[m]).collect(),
            events: symbols
                .iter()
                .map(|sym| match self.alphabet.event_of(m, *sym) {
                    None => Event::Silent,
                    Some(s) => Event::Serve(s),
                })
                .collect(),
        };
        Some(
            self.members
                .iter()
                .enumerate()
                .map(|(m, a)| AgentLasso {
                    agent: *a,
                    prefix: trace(m, &lasso.prefix.states, &lasso.prefix.symbols),
                    cycle: trace(m, &lasso.cycle.states, &lasso.cycle.symbols),
                })
                .collect(),
        )
    }
}

/// Checks a class solution: legal traces, and every member's observed words
/// satisfy its task with an infinite word.
pub fn verify(problem: &Problem, solution: &[AgentLasso]) -> Result<(), String> {
    let prefix: Vec<&[Event]> = solution.iter().map(|l| l.prefix.events.as_slice()).collect();
    let cycle: Vec<&[Event]> = solution.iter().map(|l| l.cycle.events.as_slice()).collect();
    for (m, l) in solution.iter().enumerate() {
        let task = problem.task(l.agent.0);
        l.prefix.check(&task.ts).map_err(|e| format!("agent {}: {e}", l.agent))?;
        let mut looped = l.cycle.clone();
        looped.states[0] = *l.prefix.states.last().expect("traces are never empty");
        looped.check_shape().map_err(|e| format!("agent {}: {e}", l.agent))?;
        if looped.states.first() != looped.states.last() {
            return Err(format!("agent {}: cycle does not close", l.agent));
        }
        for (k, e) in looped.events.iter().enumerate() {
            let (s, t) = (looped.states[k], looped.states[k + 1]);
            let ok = match e {
                Event::Silent => task.ts.has_edge(s, t),
                Event::Serve(svc) => svc.is_subset(task.ts.label(s)),
            };
            if !ok {
                return Err(format!("agent {}: illegal cycle step {}", l.agent, k + 1));
            }
        }
        let w_prefix = team_word(&prefix, m).map_err(|e| e.to_string())?;
        let w_loop = team_word(&cycle, m).map_err(|e| e.to_string())?;
        if w_loop.is_empty() {
            return Err(format!("agent {} is silent on the cycle", l.agent));
        }
        if !evaluate_lasso(&task.formula, &w_prefix, &w_loop) {
            return Err(format!("agent {}: task violated", l.agent));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassOutcome {
    Solved(Vec<AgentLasso>),
    NoSolution,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassReport {
    pub members: Vec<AgentId>,
    pub bound: u128,
    pub product_states: Option<usize>,
    pub outcome: ClassOutcome,
}

/// Solves every static class independently.
pub fn solve_all(problem: &Problem, cap: usize) -> Vec<ClassReport> {
    static_classes(problem)
        .into_iter()
        .map(|class| {
            let bound = size_bound(problem, &class);
            match TeamProduct::build(problem, &class, cap) {
                Ok(team) => ClassReport {
                    members: class,
                    bound,
                    product_states: Some(team.num_states()),
                    outcome: team.solve().map_or(ClassOutcome::NoSolution, ClassOutcome::Solved),
                },
                Err(CentralizedError::Budget { .. }) => {
                    ClassReport { members: class, bound, product_states: None, outcome: ClassOutcome::Budget }
                }
            }
        })
        .collect()
}

/// Atoms of agent `i`'s task that no agent offers.
pub fn unobserved_atoms(problem: &Problem, i: usize) -> BTreeSet<String> {
    let offered: BTreeSet<String> =
        problem.dependency_set(i).into_iter().flat_map(|a| problem.task(a.0).ts.services().clone()).collect();
    problem.task(i).atoms.difference(&offered).cloned().collect()
}
