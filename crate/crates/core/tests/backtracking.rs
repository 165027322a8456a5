mod common;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{line, random_formula, random_ts, set};
use rhplan::agent::{Event, TransitionSystem};
use rhplan::automata::AgentId;
use rhplan::backtrack::{compress, Snapshot};
use rhplan::centralized::{solve_all, ClassOutcome, DEFAULT_CAP};
use rhplan::engine::{reorder_priority, Config, Engine, EngineError, Problem};
use rhplan::ltl::parse_formula;

/// The kept history is a chain of real steps without repeated snapshots that
/// ends in the current snapshot.
fn check_history(e: &Engine, p: &Problem) {
    let recs = e.history().records();
    let snaps: Vec<&Snapshot> = recs.iter().map(|r| &r.snapshot).chain([e.current()]).collect();
    let distinct: BTreeSet<&Snapshot> = snaps.iter().copied().collect();
    assert_eq!(distinct.len(), snaps.len(), "repeated snapshot in history");
    for (j, r) in recs.iter().enumerate() {
        let next = snaps[j + 1];
        let joint: BTreeSet<String> = r
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Serve(s) => Some(s.clone()),
                Event::Silent => None,
            })
            .flatten()
            .collect();
        for i in 0..p.len() {
            let task = p.task(i);
            let (s, s2) = (r.snapshot.states[i], next.states[i]);
            let (q, q2) = (r.snapshot.qs[i], next.qs[i]);
            match &r.events[i] {
                Event::Silent => {
                    assert!(task.ts.has_edge(s, s2));
                    assert_eq!(q, q2);
                }
                Event::Serve(_) => {
                    assert_eq!(s, s2);
                    let sym = task.automaton.mask_of(joint.iter().map(String::as_str));
                    assert!(task.automaton.has_transition(q, sym, q2));
                }
            }
        }
        let hits: BTreeSet<AgentId> =
            (0..p.len()).filter(|i| p.task(*i).automaton.is_accepting(next.qs[*i])).map(AgentId).collect();
        assert_eq!(next.ordering, reorder_priority(&r.snapshot.ordering, &hits));
    }
}

#[test]
fn compress_cuts_cycles() {
    assert_eq!(compress(&['A', 'B', 'C', 'B', 'D']), vec!['A', 'B', 'D']);
    assert_eq!(compress(&['A', 'B', 'C']), vec!['A', 'B', 'C']);
    assert_eq!(compress(&['A', 'A', 'A']), vec!['A']);
    assert_eq!(compress(&['A', 'B', 'A', 'C', 'B', 'C']), vec!['A', 'C']);
    let empty: [u8; 0] = [];
    assert!(compress(&empty).is_empty());
}

#[test]
fn compressed_sequences_keep_endpoints_and_have_no_repeats() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let seq: Vec<u8> = (0..rng.gen_range(1..20)).map(|_| rng.gen_range(0..5)).collect();
        let c = compress(&seq);
        assert_eq!(c.first(), seq.first());
        assert_eq!(c.last(), seq.last());
        let distinct: BTreeSet<u8> = c.iter().copied().collect();
        assert_eq!(distinct.len(), c.len());
        // every kept step is a step of the original sequence
        for w in c.windows(2) {
            assert!(seq.windows(2).any(|v| v == w));
        }
    }
}

#[test]
fn dead_successor_is_swapped_for_a_live_one() {
    // a one-cell world offering only a: the automaton guesses at the second
    // step whether b will come, and the guess has to be revised
    let ts = line(1, &[(0, &["a"])], &["a", "b"]);
    let p = Problem::new(vec![(ts, parse_formula("X (a | F F b)", &set(&["a", "b"])).unwrap())]);
    let mut e = Engine::new(&p, Config { h: 1, big_h: 1, max_h: 6, max_big_h: 6 });
    e.run(12).unwrap();
    let rewinds: Vec<_> = e.records().iter().flat_map(|r| r.rewinds.clone()).collect();
    assert!(rewinds.iter().any(|r| r.alternative && r.forbids == 0), "{rewinds:?}");
    assert!(e.accepting_visits(0) >= 1);
    check_history(&e, &p);
}

#[test]
fn wrong_service_is_forbidden_and_avoided() {
    // y looks closer to acceptance with a short horizon, but v never appears
    let states = vec!["s0".to_string(), "s1".to_string()];
    let edges: Vec<(String, String)> =
        [("s0", "s0"), ("s0", "s1"), ("s1", "s1")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let labels = BTreeMap::from([("s0".to_string(), set(&["x", "y"])), ("s1".to_string(), set(&["u"]))]);
    let ts = TransitionSystem::new(states, "s0", &edges, set(&["u", "v", "x", "y"]), labels).unwrap();
    let f = parse_formula("(y & X (y & X G F v)) | (x & X X X X G F u)", &set(&["u", "v", "x", "y"])).unwrap();
    let p = Problem::new(vec![(ts, f)]);
    let mut e = Engine::new(&p, Config { h: 3, big_h: 1, max_h: 6, max_big_h: 4 });
    e.run(12).unwrap();
    assert!(!e.forbidden().is_empty());
    assert!(matches!(&e.traces()[0].events[0], Event::Serve(s) if s.contains("x")));
    assert!(e.accepting_visits(0) >= 1);
    check_history(&e, &p);
}

#[test]
fn unsatisfiable_task_ends_infeasible() {
    let p = Problem::new(vec![(line(3, &[], &["a"]), parse_formula("F a", &set(&["a"])).unwrap())]);
    let mut e = Engine::new(&p, Config::default());
    assert!(matches!(e.run(10), Err(EngineError::Infeasible { .. })));

    // needs a forever and b once; a and b are never offered together
    let states = vec!["x".to_string(), "y".to_string()];
    let edges: Vec<(String, String)> =
        [("x", "x"), ("x", "y"), ("y", "y"), ("y", "x")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let labels = BTreeMap::from([("x".to_string(), set(&["a"])), ("y".to_string(), set(&["b"]))]);
    let ts = TransitionSystem::new(states, "x", &edges, set(&["a", "b"]), labels).unwrap();
    let p = Problem::new(vec![(ts, parse_formula("G a & F b", &set(&["a", "b"])).unwrap())]);
    let mut e = Engine::new(&p, Config::default());
    assert!(matches!(e.run(50), Err(EngineError::Infeasible { .. })));
}

#[test]
fn infeasibility_verdicts_agree_with_the_centralized_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut infeasible = 0;
    for _ in 0..150 {
        let n = rng.gen_range(1..=3);
        let temporal = rng.gen_range(1..=3);
        let ts = random_ts(&mut rng, n, &["a", "b"]);
        let f = random_formula(&mut rng, &["a", "b"], temporal);
        let p = Problem::new(vec![(ts, f.clone())]);
        let mut e = Engine::new(&p, Config { h: 1, big_h: 1, max_h: 6, max_big_h: 6 });
        let r = e.run(12);
        check_history(&e, &p);
        if let Err(EngineError::Infeasible { .. }) = r {
            infeasible += 1;
            let c = solve_all(&p, DEFAULT_CAP);
            assert!(matches!(c[0].outcome, ClassOutcome::NoSolution), "{f}: receding says infeasible");
        }
    }
    assert!(infeasible > 10);
}
