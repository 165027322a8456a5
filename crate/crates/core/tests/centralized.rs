mod common;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{line, random_formula, random_ts, set};
use rhplan::agent::{team_word, Event, TransitionSystem};
use rhplan::automata::AgentId;
use rhplan::centralized::{size_bound, solve_all, static_classes, verify, ClassOutcome, TeamProduct, DEFAULT_CAP};
use rhplan::engine::Problem;
use rhplan::ltl::{evaluate_lasso, parse_formula};
use rhplan::scenario::load_scenario;

/// One joint step: per agent, the event and the next state.
type JointStep = Vec<(Event, usize)>;

fn agent_steps(ts: &TransitionSystem, s: usize) -> Vec<(Event, usize)> {
    let mut out: Vec<(Event, usize)> = ts.successors(s).iter().map(|t| (Event::Silent, *t)).collect();
    let label: Vec<&String> = ts.label(s).iter().collect();
    for m in 0..1u32 << label.len() {
        let svc = label.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, x)| (*x).clone()).collect();
        out.push((Event::Serve(svc), s));
    }
    out
}

fn joint_steps(p: &Problem, states: &[usize]) -> Vec<JointStep> {
    let mut out: Vec<JointStep> = vec![Vec::new()];
    for (i, s) in states.iter().enumerate() {
        let opts = agent_steps(&p.task(i).ts, *s);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.push(o.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// Whether some joint lasso with `|prefix| <= max_prefix` and
/// `1 <= |cycle| <= max_cycle` makes every agent serve on the cycle and
/// satisfy its task on the observed words.
fn brute_force(p: &Problem, max_prefix: usize, max_cycle: usize) -> bool {
    let init: Vec<usize> = (0..p.len()).map(|i| p.task(i).ts.init()).collect();
    let mut found = false;
    let mut walk: Vec<JointStep> = Vec::new();
    search(p, &init, &mut walk, max_prefix + max_cycle, &mut |walk, states| {
        // try every split whose cycle closes at the current joint state
        let mut at = init.clone();
        let mut positions = vec![at.clone()];
        for step in walk.iter() {
            at = step.iter().map(|(_, t)| *t).collect();
            positions.push(at.clone());
        }
        for start in 0..walk.len() {
            if start > max_prefix || walk.len() - start > max_cycle || positions[start] != states {
                continue;
            }
            let events = |i: usize, r: std::ops::Range<usize>| walk[r].iter().map(|s| s[i].0.clone()).collect::<Vec<_>>();
            let ok = (0..p.len()).all(|i| {
                let pre: Vec<Vec<Event>> = (0..p.len()).map(|j| events(j, 0..start)).collect();
                let cyc: Vec<Vec<Event>> = (0..p.len()).map(|j| events(j, start..walk.len())).collect();
                let pre: Vec<&[Event]> = pre.iter().map(Vec::as_slice).collect();
                let cyc: Vec<&[Event]> = cyc.iter().map(Vec::as_slice).collect();
                let wp = team_word(&pre, i).unwrap();
                let wc = team_word(&cyc, i).unwrap();
                !wc.is_empty() && evaluate_lasso(&p.task(i).formula, &wp, &wc)
            });
            if ok {
                return true;
            }
        }
        false
    }, &mut found);
    found
}

fn search(
    p: &Problem,
    states: &[usize],
    walk: &mut Vec<JointStep>,
    depth: usize,
    check: &mut dyn FnMut(&[JointStep], &[usize]) -> bool,
    found: &mut bool,
) {
    if *found {
        return;
    }
    if !walk.is_empty() && check(walk, states) {
        *found = true;
        return;
    }
    if depth == 0 {
        return;
    }
    for step in joint_steps(p, states) {
        let next: Vec<usize> = step.iter().map(|(_, t)| *t).collect();
        walk.push(step);
        search(p, &next, walk, depth - 1, check, found);
        walk.pop();
        if *found {
            return;
        }
    }
}

fn solved(p: &Problem) -> bool {
    let reports = solve_all(p, DEFAULT_CAP);
    for r in &reports {
        if let ClassOutcome::Solved(sol) = &r.outcome {
            verify(p, sol).unwrap();
        }
    }
    reports.iter().all(|r| matches!(r.outcome, ClassOutcome::Solved(_)))
}

#[test]
fn warehouse_bounds_are_analytic() {
    let s = load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/warehouse.json")).unwrap();
    let all: Vec<AgentId> = (0..3).map(AgentId).collect();
    assert_eq!(size_bound(&s.problem, &all), 2_985_984);
    assert_eq!(size_bound(&s.problem, &all[..2]), 20_736);
    assert_eq!(static_classes(&s.problem), vec![all.clone()]);
    let reports = solve_all(&s.problem, DEFAULT_CAP);
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].outcome, ClassOutcome::Budget);
    assert_eq!(reports[0].product_states, None);
}

#[test]
fn singleton_bound_is_the_state_count() {
    let p = Problem::new(vec![(line(10, &[(9, &["a"])], &["a"]), parse_formula("G F a", &set(&["a"])).unwrap())]);
    assert_eq!(size_bound(&p, &[AgentId(0)]), 10);
    assert!(solved(&p));
}

#[test]
fn pair_on_single_cells_has_a_verified_lasso() {
    let atoms = set(&["a", "b"]);
    let p = Problem::new(vec![
        (line(1, &[(0, &["a"])], &["a"]), parse_formula("a & X (a & b)", &atoms).unwrap()),
        (line(1, &[(0, &["b"])], &["b"]), parse_formula("b & X (b & a)", &atoms).unwrap()),
    ]);
    let team = TeamProduct::build(&p, &[AgentId(0), AgentId(1)], DEFAULT_CAP).unwrap();
    assert!(team.num_states() > 0);
    let sol = team.solve().unwrap();
    verify(&p, &sol).unwrap();
    // the induced words, checked independently
    let pre: Vec<&[Event]> = sol.iter().map(|l| l.prefix.events.as_slice()).collect();
    let cyc: Vec<&[Event]> = sol.iter().map(|l| l.cycle.events.as_slice()).collect();
    for i in 0..2 {
        let (wp, wc) = (team_word(&pre, i).unwrap(), team_word(&cyc, i).unwrap());
        assert!(evaluate_lasso(&p.task(i).formula, &wp, &wc));
    }
    assert!(brute_force(&p, 2, 1));
}

#[test]
fn unsatisfiable_task_has_no_solution() {
    let p = Problem::new(vec![(line(2, &[(1, &["b"])], &["a", "b"]), parse_formula("F a", &set(&["a", "b"])).unwrap())]);
    assert!(!solved(&p));
    assert!(!brute_force(&p, 2, 2));
}

#[test]
fn bounded_joint_search_never_beats_the_team_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (mut yes, mut no) = (0, 0);
    for round in 0..80 {
        let p = if round % 2 == 0 {
            let n = rng.gen_range(1..=3);
            let t = rng.gen_range(1..=3);
            Problem::new(vec![(random_ts(&mut rng, n, &["a", "b"]), random_formula(&mut rng, &["a", "b"], t))])
        } else {
            let (n1, n2) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            let (t1, t2) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            Problem::new(vec![
                (random_ts(&mut rng, n1, &["a"]), random_formula(&mut rng, &["a", "b"], t1)),
                (random_ts(&mut rng, n2, &["b"]), random_formula(&mut rng, &["a", "b"], t2)),
            ])
        };
        let bounds = if p.len() == 1 { (3, 3) } else { (1, 2) };
        let brute = brute_force(&p, bounds.0, bounds.1);
        let central = solved(&p);
        assert!(!brute || central, "bounded search found a solution the team product missed");
        if central {
            yes += 1;
        } else {
            no += 1;
        }
    }
    assert!(yes > 10 && no > 5, "{yes} solved, {no} unsolved");
}
