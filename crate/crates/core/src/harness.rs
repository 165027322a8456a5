//! Experiment runs over a scenario: receding-horizon execution, the
//! centralized baseline, metrics CSV and the step-by-step trace log.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Event, ModelError, Trace};
use crate::automata::AgentId;
use crate::centralized::{self, ClassOutcome, ClassReport};
use crate::engine::{window_progress, Engine, EngineError, IterationRecord};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: String, source: csv::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Receding,
    Centralized,
    Both,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub metrics: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Largest team product the centralized baseline will build.
    pub cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { mode: Mode::Receding, metrics: None, trace: None, cap: centralized::DEFAULT_CAP }
    }
}

/// Outcome of the receding-horizon run.
#[derive(Debug, Clone)]
pub struct RecedingReport {
    pub records: Vec<IterationRecord>,
    pub traces: Vec<Trace>,
    pub runs: Vec<Vec<usize>>,
    pub visits: Vec<usize>,
    pub window: usize,
    pub window_progress: bool,
    pub error: Option<EngineError>,
}

impl RecedingReport {
    pub fn max_q_p(&self) -> usize {
        self.records.iter().flat_map(|r| r.classes.iter().map(|c| c.q_p)).max().unwrap_or(0)
    }

    pub fn max_big_h(&self) -> usize {
        self.records.iter().flat_map(|r| r.classes.iter().map(|c| c.big_h)).max().unwrap_or(0)
    }

    pub fn rewinds(&self) -> usize {
        self.records.iter().map(|r| r.rewinds.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct CentralizedReport {
    pub classes: Vec<ClassReport>,
    /// Verification failures of found solutions; empty when all check out.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub receding: Option<RecedingReport>,
    pub centralized: Option<CentralizedReport>,
}

impl ExperimentReport {
    /// 0 success, 2 infeasible, 3 budget exceeded, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        let mut infeasible = false;
        let mut budget = false;
        let mut other = false;
        if let Some(r) = &self.receding {
            match &r.error {
                None => {}
                Some(EngineError::Infeasible { .. }) => infeasible = true,
                Some(EngineError::Budget { .. }) => budget = true,
                Some(_) => other = true,
            }
        }
        if let Some(c) = &self.centralized {
            for class in &c.classes {
                match class.outcome {
                    ClassOutcome::Solved(_) => {}
                    ClassOutcome::NoSolution => infeasible = true,
                    ClassOutcome::Budget => budget = true,
                }
            }
            other |= !c.failures.is_empty();
        }
        if other {
            1
        } else if infeasible {
            2
        } else if budget {
            3
        } else {
            0
        }
    }
}

/// Runs the scenario in the requested mode and writes the requested files.
pub fn run_experiment(scenario: &Scenario, opts: &RunOptions) -> Result<ExperimentReport, HarnessError> {
    let receding = match opts.mode {
        Mode::Receding | Mode::Both => Some(run_receding(scenario)),
        Mode::Centralized => None,
    };
    if let Some(r) = &receding {
        if let Some(path) = &opts.metrics {
            write_file(path, |w| write_metrics(w, &r.records).map_err(csv_to_io))?;
        }
        if let Some(path) = &opts.trace {
            let log = format_trace_log(scenario, &r.traces, &r.runs);
            write_file(path, |w| w.write_all(log.as_bytes()))?;
        }
    }
    let centralized = match opts.mode {
        Mode::Centralized | Mode::Both => Some(run_centralized(scenario, opts.cap)),
        Mode::Receding => None,
    };
    Ok(ExperimentReport { receding, centralized })
}

fn csv_to_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::fs::File) -> std::io::Result<()>) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.display().to_string(), source };
    let mut file = std::fs::File::create(path).map_err(io)?;
    f(&mut file).map_err(io)?;
    file.flush().map_err(io)
}

pub fn run_receding(scenario: &Scenario) -> RecedingReport {
    let ordering = scenario.ordering.iter().map(|i| AgentId(*i)).collect();
    let mut engine = Engine::with_ordering(&scenario.problem, scenario.config, ordering);
    let mut error = None;
    for _ in 0..scenario.iterations {
        if let Err(e) = engine.step() {
            error = Some(e);
            break;
        }
    }
    RecedingReport {
        records: engine.records().to_vec(),
        traces: engine.traces().to_vec(),
        runs: engine.runs().to_vec(),
        visits: (0..scenario.problem.len()).map(|i| engine.accepting_visits(i)).collect(),
        window: scenario.window,
        window_progress: window_progress(&engine, scenario.window),
        error,
    }
}

pub fn run_centralized(scenario: &Scenario, cap: usize) -> CentralizedReport {
    let classes = centralized::solve_all(&scenario.problem, cap);
    let failures = classes
        .iter()
        .filter_map(|c| match &c.outcome {
            ClassOutcome::Solved(lassos) => centralized::verify(&scenario.problem, lassos).err(),
            _ => None,
        })
        .collect();
    CentralizedReport { classes, failures }
}

/// One metrics row. Per-class columns hold one value per class, separated
/// by `;`, in the order of `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub classes: String,
    pub q_a: String,
    pub q_p: String,
    pub h: String,
    #[serde(rename = "H")]
    pub big_h: String,
    pub plan_len: String,
    pub ordering: String,
    pub backtracks: usize,
}

pub const METRICS_HEADER: &str = "iteration,classes,q_a,q_p,h,H,plan_len,ordering,backtracks";

fn agents(list: &[AgentId], sep: &str) -> String {
    list.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

impl MetricsRow {
    pub fn from_record(r: &IterationRecord) -> MetricsRow {
        let per_class = |f: &dyn Fn(&crate::engine::ClassMetrics) -> usize| {
            r.classes.iter().map(|c| f(c).to_string()).collect::<Vec<_>>().join(";")
        };
        MetricsRow {
            iteration: r.iteration,
            classes: r.classes.iter().map(|c| agents(&c.members, "+")).collect::<Vec<_>>().join(";"),
            q_a: per_class(&|c| c.q_a),
            q_p: per_class(&|c| c.q_p),
            h: per_class(&|c| c.h),
            big_h: per_class(&|c| c.big_h),
            plan_len: per_class(&|c| c.plan_len),
            ordering: agents(&r.ordering, " "),
            backtracks: r.rewinds.len(),
        }
    }
}

pub fn write_metrics<W: Write>(out: W, records: &[IterationRecord]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER.split(','))?;
    for r in records {
        w.serialize(MetricsRow::from_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: std::io::Read>(input: R) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

fn format_event(e: &Event, agent: usize) -> String {
    match e {
        Event::Silent => format!("~{}", agent + 1),
        Event::Serve(s) => format!("{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(",")),
    }
}

/// The execution as one line per time step and agent,
/// `t | agent=i state=s event={…}|~i | q=…`, followed by a final line per
/// agent with `event=-` for the state reached after the last step.
pub fn format_trace_log(scenario: &Scenario, traces: &[Trace], runs: &[Vec<usize>]) -> String {
    let mut out = String::new();
    let steps = traces.first().map_or(0, |t| t.events.len());
    for t in 0..=steps {
        for (i, trace) in traces.iter().enumerate() {
            let ts = &scenario.problem.task(i).ts;
            let event = trace.events.get(t).map_or_else(|| "-".to_string(), |e| format_event(e, i));
            let _ = writeln!(
                out,
                "{} | agent={} state={} event={} | q={}",
                t + 1,
                i + 1,
                ts.state_name(trace.states[t]),
                event,
                runs[i][t]
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceLogError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("agent {agent}: {source}")]
    Replay { agent: usize, source: ModelError },
}

/// Parsed trace log: per agent, the trace and the task-automaton run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayedLog {
    pub traces: Vec<Trace>,
    pub runs: Vec<Vec<usize>>,
}

/// Parses a trace log and replays every agent's trace against its model.
/// Silent steps must also leave the task automaton state unchanged.
pub fn replay_trace_log(scenario: &Scenario, text: &str) -> Result<ReplayedLog, TraceLogError> {
    let n = scenario.problem.len();
    let mut states: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); n];
    let mut runs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut closed = vec![false; n];
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let err = |message: &str| TraceLogError::Syntax { line, message: message.to_string() };
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split(" | ").collect();
        let [time, mid, q] = parts.as_slice() else {
            return Err(err("expected three `|`-separated fields"));
        };
        let time: usize = time.trim().parse().map_err(|_| err("bad time"))?;
        let q: usize = q.trim().strip_prefix("q=").and_then(|v| v.parse().ok()).ok_or_else(|| err("bad q field"))?;
        let mut agent = None;
        let mut state = None;
        let mut event = None;
        for field in mid.split_whitespace() {
            match field.split_once('=') {
                Some(("agent", v)) => agent = v.parse::<usize>().ok(),
                Some(("state", v)) => state = Some(v),
                Some(("event", v)) => event = Some(v),
                _ => return Err(err("unknown field")),
            }
        }
        let i = match agent {
            Some(a) if (1..=n).contains(&a) => a - 1,
            _ => return Err(err("bad agent")),
        };
        if closed[i] {
            return Err(err("step after the final line"));
        }
        if time != states[i].len() + 1 {
            return Err(err("time out of sequence"));
        }
        let ts = &scenario.problem.task(i).ts;
        let s = state.and_then(|v| ts.state_index(v)).ok_or_else(|| err("unknown state"))?;
        states[i].push(s);
        runs[i].push(q);
        match event.ok_or_else(|| err("missing event"))? {
            "-" => closed[i] = true,
            v if v == format!("~{}", i + 1) => events[i].push(Event::Silent),
            v => {
                let inner = v
                    .strip_prefix('{')
                    .and_then(|v| v.strip_suffix('}'))
                    .ok_or_else(|| err("bad event"))?;
                let set: BTreeSet<String> =
                    inner.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect();
                events[i].push(Event::Serve(set));
            }
        }
    }
    if let Some(i) = closed.iter().position(|c| !c) {
        return Err(TraceLogError::Syntax { line: text.lines().count(), message: format!("agent {} has no final line", i + 1) });
    }
    let mut traces = Vec::with_capacity(n);
    for i in 0..n {
        let trace = Trace { states: std::mem::take(&mut states[i]), events: std::mem::take(&mut events[i]) };
        let replay = |source| TraceLogError::Replay { agent: i + 1, source };
        trace.check(&scenario.problem.task(i).ts).map_err(replay)?;
        for (k, e) in trace.events.iter().enumerate() {
            if e.is_silent() && runs[i][k] != runs[i][k + 1] {
                return Err(replay(ModelError::IllegalStep {
                    step: k + 1,
                    message: "task automaton moved on a silent step".into(),
                }));
            }
        }
        traces.push(trace);
    }
    Ok(ReplayedLog { traces, runs })
}

fn format_trace(scenario: &Scenario, i: usize, trace: &Trace) -> String {
    let ts = &scenario.problem.task(i).ts;
    let mut out = ts.state_name(trace.states[0]).to_string();
    for (e, s) in trace.events.iter().zip(&trace.states[1..]) {
        let _ = write!(out, " {} {}", format_event(e, i), ts.state_name(*s));
    }
    out
}

/// Human-readable summary of a report.
pub fn summary(scenario: &Scenario, report: &ExperimentReport) -> String {
    let mut out = String::new();
    let name = |a: usize| scenario.names[a].as_str();
    if let Some(r) = &report.receding {
        let _ = writeln!(out, "receding horizon: {} iterations, {} steps", r.records.len(), r.traces[0].events.len());
        let _ = writeln!(out, "  max |Q_P| {}, max H {}, rewinds {}", r.max_q_p(), r.max_big_h(), r.rewinds());
        for (i, v) in r.visits.iter().enumerate() {
            let _ = writeln!(out, "  {}: {} accepting visits", name(i), v);
        }
        let _ = writeln!(out, "  progress in every {}-step window: {}", r.window, if r.window_progress { "yes" } else { "no" });
        if let Some(e) = &r.error {
            let _ = writeln!(out, "  stopped: {e}");
        }
    }
    if let Some(c) = &report.centralized {
        let _ = writeln!(out, "centralized:");
        for class in &c.classes {
            let members: Vec<&str> = class.members.iter().map(|a| name(a.0)).collect();
            let _ = write!(out, "  class {{{}}}: {} joint agent states", members.join(", "), class.bound);
            if let Some(p) = class.product_states {
                let _ = write!(out, ", {p} product states");
            }
            match &class.outcome {
                ClassOutcome::Solved(lassos) => {
                    let _ = writeln!(out, ", solved");
                    for l in lassos {
                        let i = l.agent.0;
                        let _ = writeln!(out, "    {} prefix: {}", name(i), format_trace(scenario, i, &l.prefix));
                        let _ = writeln!(out, "    {} cycle:  {}", name(i), format_trace(scenario, i, &l.cycle));
                    }
                }
                ClassOutcome::NoSolution => {
                    let _ = writeln!(out, ", no solution");
                }
                ClassOutcome::Budget => {
                    let _ = writeln!(out, ", above the cap; not built");
                }
            }
        }
        for f in &c.failures {
            let _ = writeln!(out, "  verification failed: {f}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    const CORRIDOR: &str = r#"{
        "agents": [{
            "services": ["a", "b"],
            "model": {"kind": "explicit", "states": ["x", "y"], "init": "x",
                      "edges": [["x", "x"], ["y", "y"], ["x", "y"], ["y", "x"]],
                      "labels": {"x": ["a"], "y": ["b"]}},
            "task": "G F a & G F b"
        }],
        "iterations": 6
    }"#;

    #[test]
    fn metrics_rows_match_iterations() {
        let s = parse_scenario(CORRIDOR).unwrap();
        let r = run_receding(&s);
        assert!(r.error.is_none());
        let mut buf = Vec::new();
        write_metrics(&mut buf, &r.records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(METRICS_HEADER));
        let rows = read_metrics(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].classes, "1");
    }

    #[test]
    fn empty_run_gives_header_only() {
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn trace_log_replays() {
        let s = parse_scenario(CORRIDOR).unwrap();
        let r = run_receding(&s);
        let log = format_trace_log(&s, &r.traces, &r.runs);
        assert_eq!(log.lines().count(), 7);
        assert!(log.lines().last().unwrap().contains("event=-"));
        let back = replay_trace_log(&s, &log).unwrap();
        assert_eq!(back.traces, r.traces);
        assert_eq!(back.runs, r.runs);
    }

    #[test]
    fn tampered_log_is_rejected() {
        let s = parse_scenario(CORRIDOR).unwrap();
        let r = run_receding(&s);
        let log = format_trace_log(&s, &r.traces, &r.runs);
        // serving b in x is not offered
        let bad = log.replacen("state=x event={a}", "state=x event={b}", 1);
        assert_ne!(bad, log);
        assert!(matches!(replay_trace_log(&s, &bad), Err(TraceLogError::Replay { agent: 1, .. })));
        let cut: String = log.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(replay_trace_log(&s, &cut), Err(TraceLogError::Syntax { .. })));
    }

    #[test]
    fn exit_codes() {
        let s = parse_scenario(CORRIDOR).unwrap();
        let both = RunOptions { mode: Mode::Both, ..RunOptions::default() };
        let report = run_experiment(&s, &both).unwrap();
        assert_eq!(report.exit_code(), 0);
        let tight = RunOptions { mode: Mode::Centralized, cap: 1, ..RunOptions::default() };
        assert_eq!(run_experiment(&s, &tight).unwrap().exit_code(), 3);
        let never = parse_scenario(&CORRIDOR.replace("G F a & G F b", "G a & F b")).unwrap();
        assert_eq!(run_experiment(&never, &both).unwrap().exit_code(), 2);
    }
}
