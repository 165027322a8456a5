//! Agent transition systems, traces, produced words and team words.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::ltl::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("trace has {states} states for {events} events")]
    TraceShape { states: usize, events: usize },
    #[error("step {step}: services provided while changing state")]
    ServeWhileMoving { step: usize },
    #[error("step {step}: {message}")]
    IllegalStep { step: usize, message: String },
    #[error("traces have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("grid row {row}, column {col}: {message}")]
    Grid { row: usize, col: usize, message: String },
}

/// Labelled transition system of one agent. States are indexed in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    states: Vec<String>,
    init: usize,
    adjacency: Vec<Vec<usize>>,
    services: BTreeSet<String>,
    labels: Vec<BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingSelfLoop(String),
    Unreachable { from: String, to: String },
    LabelOutsideServices { state: String, service: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingSelfLoop(s) => write!(f, "state `{s}` has no self-loop"),
            Violation::Unreachable { from, to } => write!(f, "state `{to}` is unreachable from `{from}`"),
            Violation::LabelOutsideServices { state, service } => {
                write!(f, "state `{state}` offers `{service}`, which the agent does not own")
            }
        }
    }
}

impl TransitionSystem {
    pub fn new(
        states: Vec<String>,
        init: &str,
        edges: &[(String, String)],
        services: BTreeSet<String>,
        labels: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self, ModelError> {
        let mut index = BTreeMap::new();
        for (i, s) in states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ModelError::DuplicateState(s.clone()));
            }
        }
        let find = |s: &str| index.get(s).copied().ok_or_else(|| ModelError::UnknownState(s.to_string()));
        let init = find(init)?;
        let mut adjacency = vec![Vec::new(); states.len()];
        for (a, b) in edges {
            adjacency[find(a)?].push(find(b)?);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        let mut lab = vec![BTreeSet::new(); states.len()];
        for (s, l) in labels {
            lab[find(&s)?] = l;
        }
        Ok(TransitionSystem { states, init, adjacency, services, labels: lab })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn init(&self) -> usize {
        self.init
    }

    /// Successors of `s` in ascending order (including `s` itself when the
    /// model is well formed).
    pub fn successors(&self, s: usize) -> &[usize] {
        &self.adjacency[s]
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.adjacency[s].binary_search(&t).is_ok()
    }

    pub fn services(&self) -> &BTreeSet<String> {
        &self.services
    }

    pub fn label(&self, s: usize) -> &BTreeSet<String> {
        &self.labels[s]
    }

    /// Checks the standing assumptions: self-loops everywhere, strong
    /// connectivity and labels within the agent's own services.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for s in 0..self.num_states() {
            if !self.has_edge(s, s) {
                out.push(Violation::MissingSelfLoop(self.states[s].clone()));
            }
            for svc in &self.labels[s] {
                if !self.services.contains(svc) {
                    out.push(Violation::LabelOutsideServices {
                        state: self.states[s].clone(),
                        service: svc.clone(),
                    });
                }
            }
        }
        let n = self.num_states();
        let reach = |src: usize, succ: &dyn Fn(usize) -> Vec<usize>| {
            let mut seen = vec![false; n];
            seen[src] = true;
            let mut queue = VecDeque::from([src]);
            while let Some(v) = queue.pop_front() {
                for w in succ(v) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            seen
        };
        if n > 0 {
            // strongly connected iff everything is reachable from state 0 in
            // both directions
            let mut pred = vec![Vec::new(); n];
            for (s, adj) in self.adjacency.iter().enumerate() {
                for t in adj {
                    pred[*t].push(s);
                }
            }
            let fwd = reach(0, &|v| self.adjacency[v].clone());
            let bwd = reach(0, &|v| pred[v].clone());
            for t in 0..n {
                if !fwd[t] {
                    out.push(Violation::Unreachable { from: self.states[0].clone(), to: self.states[t].clone() });
                }
                if !bwd[t] {
                    out.push(Violation::Unreachable { from: self.states[t].clone(), to: self.states[0].clone() });
                }
            }
        }
        out
    }
}

/// One step event: a provided (possibly empty) service set, or the silent
/// service emitted while moving.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Serve(BTreeSet<String>),
    Silent,
}

impl Event {
    pub fn serve(names: &[&str]) -> Event {
        Event::Serve(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, Event::Silent)
    }
}

/// A finite trace prefix `s_1 ϖ_1 s_2 … ϖ_{m-1} s_m`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub states: Vec<usize>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn start(s: usize) -> Trace {
        Trace { states: vec![s], events: Vec::new() }
    }

    pub fn push(&mut self, event: Event, next: usize) {
        self.events.push(event);
        self.states.push(next);
    }

    /// Alternation check without a model: shape, and no service provision
    /// across a state change.
    pub fn check_shape(&self) -> Result<(), ModelError> {
        if self.states.len() != self.events.len() + 1 {
            return Err(ModelError::TraceShape { states: self.states.len(), events: self.events.len() });
        }
        for (k, e) in self.events.iter().enumerate() {
            if !e.is_silent() && self.states[k] != self.states[k + 1] {
                return Err(ModelError::ServeWhileMoving { step: k + 1 });
            }
        }
        Ok(())
    }

    /// Full check against the agent's model, including the start state.
    pub fn check(&self, ts: &TransitionSystem) -> Result<(), ModelError> {
        self.check_shape()?;
        if self.states.first() != Some(&ts.init()) {
            return Err(ModelError::IllegalStep { step: 0, message: "trace does not start in the initial state".into() });
        }
        for (k, e) in self.events.iter().enumerate() {
            let (s, t) = (self.states[k], self.states[k + 1]);
            match e {
                Event::Silent if !ts.has_edge(s, t) => {
                    return Err(ModelError::IllegalStep {
                        step: k + 1,
                        message: format!("no transition {} -> {}", ts.state_name(s), ts.state_name(t)),
                    })
                }
                Event::Serve(svc) if !svc.is_subset(ts.label(s)) => {
                    return Err(ModelError::IllegalStep {
                        step: k + 1,
                        message: format!("services {svc:?} not offered in {}", ts.state_name(s)),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Number of non-silent events so far.
    pub fn service_count(&self) -> usize {
        self.events.iter().filter(|e| !e.is_silent()).count()
    }
}

/// The word produced by a sequence of events together with its service time
/// sequence (one-based positions of the non-silent events).
pub fn produced_word(events: &[Event]) -> (Vec<Symbol>, Vec<usize>) {
    let mut word = Vec::new();
    let mut times = Vec::new();
    for (k, e) in events.iter().enumerate() {
        if let Event::Serve(s) = e {
            word.push(s.clone());
            times.push(k + 1);
        }
    }
    (word, times)
}

/// The word observed by agent `observer` over the time-aligned event
/// sequences of its dependency set: at each time the observer serves, the
/// union of everything served at that time.
pub fn team_word(traces: &[&[Event]], observer: usize) -> Result<Vec<Symbol>, ModelError> {
    let len = traces[observer].len();
    if let Some(t) = traces.iter().find(|t| t.len() != len) {
        return Err(ModelError::LengthMismatch(len, t.len()));
    }
    let (_, times) = produced_word(traces[observer]);
    Ok(times
        .into_iter()
        .map(|k| {
            let mut sym = Symbol::new();
            for t in traces {
                if let Event::Serve(s) = &t[k - 1] {
                    sym.extend(s.iter().cloned());
                }
            }
            sym
        })
        .collect())
}

/// A parsed grid map: cells in row-major order with 4-neighbour adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub cells: Vec<String>,
    pub positions: Vec<(usize, usize)>,
    pub services: Vec<BTreeSet<String>>,
}

impl Grid {
    /// Parses rows of whitespace-separated tokens: `.` is a plain cell, `#` a
    /// wall, `name:svc1+svc2` a named cell offering services. Plain cells and
    /// cells with an empty name (`:svc`) are named `r<row>c<col>`.
    pub fn parse(rows: &[String]) -> Result<Grid, ModelError> {
        let mut grid = Grid { cells: Vec::new(), positions: Vec::new(), services: Vec::new() };
        let mut seen = BTreeSet::new();
        let width = rows.first().map_or(0, |r| r.split_whitespace().count());
        for (r, row) in rows.iter().enumerate() {
            let toks: Vec<&str> = row.split_whitespace().collect();
            if toks.len() != width {
                return Err(ModelError::Grid { row: r, col: toks.len(), message: format!("expected {width} cells") });
            }
            for (c, tok) in toks.into_iter().enumerate() {
                let (name, svcs) = match tok {
                    "#" => continue,
                    "." => (format!("r{r}c{c}"), BTreeSet::new()),
                    _ => {
                        let (name, list) = tok.split_once(':').unwrap_or((tok, ""));
                        let name = if name.is_empty() { format!("r{r}c{c}") } else { name.to_string() };
                        let valid = |s: &str| crate::automata::Letter::parse(s).is_some_and(|l| !l.is_silent());
                        if !valid(&name) {
                            return Err(ModelError::Grid { row: r, col: c, message: format!("bad cell name `{name}`") });
                        }
                        let svcs: BTreeSet<String> =
                            list.split('+').filter(|s| !s.is_empty()).map(str::to_string).collect();
                        if let Some(bad) = svcs.iter().find(|s| !valid(s)) {
                            return Err(ModelError::Grid { row: r, col: c, message: format!("bad service `{bad}`") });
                        }
                        (name, svcs)
                    }
                };
                if !seen.insert(name.clone()) {
                    return Err(ModelError::Grid { row: r, col: c, message: format!("duplicate cell `{name}`") });
                }
                grid.cells.push(name);
                grid.positions.push((r, c));
                grid.services.push(svcs);
            }
        }
        Ok(grid)
    }

    /// Builds an agent's transition system on this map: cell labels are
    /// restricted to the agent's own services.
    pub fn transition_system(&self, init: &str, services: &BTreeSet<String>) -> Result<TransitionSystem, ModelError> {
        let at: BTreeMap<(usize, usize), usize> = self.positions.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut edges = Vec::new();
        for (i, (r, c)) in self.positions.iter().enumerate() {
            edges.push((self.cells[i].clone(), self.cells[i].clone()));
            let mut near = vec![(*r + 1, *c), (*r, *c + 1)];
            if *r > 0 {
                near.push((r - 1, *c));
            }
            if *c > 0 {
                near.push((*r, c - 1));
            }
            for p in near {
                if let Some(j) = at.get(&p) {
                    edges.push((self.cells[i].clone(), self.cells[*j].clone()));
                }
            }
        }
        let labels = self
            .cells
            .iter()
            .zip(&self.services)
            .map(|(n, s)| (n.clone(), s.intersection(services).cloned().collect()))
            .collect();
        TransitionSystem::new(self.cells.clone(), init, &edges, services.clone(), labels)
    }
}
