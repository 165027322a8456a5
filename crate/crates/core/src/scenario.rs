//! Scenario files: agents (explicit or on a shared grid map), tasks, horizons.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::agent::{Grid, ModelError, TransitionSystem};
use crate::engine::{Config, Problem};
use crate::ltl::{parse_formula, Formula, LtlError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("agent {agent}: {source}")]
    Model { agent: usize, source: ModelError },
    #[error("agent {agent}: task: {source}")]
    Task { agent: usize, source: LtlError },
    #[error("agent {agent}: {message}")]
    Agent { agent: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn default_h() -> usize {
    3
}
fn default_big_h() -> usize {
    5
}
fn default_max_h() -> usize {
    6
}
fn default_max_big_h() -> usize {
    12
}
fn default_iterations() -> usize {
    100
}
fn default_window() -> usize {
    25
}

/// The on-disk form.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub maps: BTreeMap<String, Vec<String>>,
    pub agents: Vec<AgentSpec>,
    #[serde(default = "default_h")]
    pub h: usize,
    #[serde(default = "default_big_h", rename = "H")]
    pub big_h: usize,
    #[serde(default = "default_max_h")]
    pub max_h: usize,
    #[serde(default = "default_max_big_h", rename = "max_H")]
    pub max_big_h: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Initial priority ordering, one-based; defaults to 1..N.
    #[serde(default)]
    pub ordering: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub services: Vec<String>,
    pub model: ModelSpec,
    pub task: String,
    /// One-based agents whose services the task may mention (the agent
    /// itself is always included). Defaults to everyone.
    #[serde(default)]
    pub depends_on: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Grid {
        map: String,
        init: String,
    },
    Explicit {
        states: Vec<String>,
        init: String,
        edges: Vec<(String, String)>,
        #[serde(default)]
        labels: BTreeMap<String, Vec<String>>,
    },
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub names: Vec<String>,
    pub problem: Problem,
    pub config: Config,
    pub iterations: usize,
    pub window: usize,
    pub ordering: Vec<usize>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    build(file)
}

fn build(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let n = file.agents.len();
    if n == 0 {
        return Err(ScenarioError::Invalid("no agents".into()));
    }
    if n > 64 {
        return Err(ScenarioError::Invalid(format!("{n} agents; at most 64 are supported")));
    }
    if file.h == 0 || file.big_h == 0 {
        return Err(ScenarioError::Invalid("horizons must be at least 1".into()));
    }
    if file.max_h < file.h || file.max_big_h < file.big_h {
        return Err(ScenarioError::Invalid("horizon caps must not be below the horizons".into()));
    }
    let mut grids = BTreeMap::new();
    for (name, rows) in &file.maps {
        let g = Grid::parse(rows).map_err(|e| ScenarioError::Invalid(format!("map `{name}`: {e}")))?;
        grids.insert(name.clone(), g);
    }
    let services: Vec<BTreeSet<String>> =
        file.agents.iter().map(|a| a.services.iter().cloned().collect()).collect();
    for (i, svc) in services.iter().enumerate() {
        for (j, other) in services.iter().enumerate().take(i) {
            if let Some(s) = svc.intersection(other).next() {
                return Err(ScenarioError::Agent {
                    agent: i + 1,
                    message: format!("service `{s}` is also offered by agent {}", j + 1),
                });
            }
        }
    }

    let mut agents: Vec<(TransitionSystem, Formula)> = Vec::new();
    for (i, spec) in file.agents.iter().enumerate() {
        let agent = i + 1;
        let ts = match &spec.model {
            ModelSpec::Grid { map, init } => {
                let g = grids
                    .get(map)
                    .ok_or_else(|| ScenarioError::Agent { agent, message: format!("unknown map `{map}`") })?;
                g.transition_system(init, &services[i])
            }
            ModelSpec::Explicit { states, init, edges, labels } => {
                let labels = labels.iter().map(|(k, v)| (k.clone(), v.iter().cloned().collect())).collect();
                TransitionSystem::new(states.clone(), init, edges, services[i].clone(), labels)
            }
        }
        .map_err(|source| ScenarioError::Model { agent, source })?;
        if let Some(v) = ts.validate().first() {
            return Err(ScenarioError::Agent { agent, message: v.to_string() });
        }
        let deps: Vec<usize> = match &spec.depends_on {
            Some(d) => {
                if let Some(bad) = d.iter().find(|j| **j == 0 || **j > n) {
                    return Err(ScenarioError::Agent { agent, message: format!("unknown agent {bad} in depends_on") });
                }
                d.iter().map(|j| j - 1).chain([i]).collect()
            }
            None => (0..n).collect(),
        };
        let atoms: BTreeSet<String> = deps.iter().flat_map(|j| services[*j].iter().cloned()).collect();
        let formula = parse_formula(&spec.task, &atoms).map_err(|source| ScenarioError::Task { agent, source })?;
        agents.push((ts, formula));
    }

    let ordering = match file.ordering {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (1..=n).collect::<Vec<_>>() {
                return Err(ScenarioError::Invalid("ordering must be a permutation of 1..N".into()));
            }
            o.into_iter().map(|x| x - 1).collect()
        }
        None => (0..n).collect(),
    };
    Ok(Scenario {
        names: file.agents.iter().enumerate().map(|(i, a)| a.name.clone().unwrap_or_else(|| format!("agent{}", i + 1))).collect(),
        problem: Problem::new(agents),
        config: Config { h: file.h, big_h: file.big_h, max_h: file.max_h, max_big_h: file.max_big_h },
        iterations: file.iterations,
        window: file.window,
        ordering,
    })
}
