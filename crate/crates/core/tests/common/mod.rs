#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use rhplan::agent::TransitionSystem;
use rhplan::automata::BuchiAutomaton;
use rhplan::ltl::{Formula, Symbol};
use rhplan::product::ProductSystem;

pub fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Every subset of `atoms`, smallest first.
pub fn all_symbols(atoms: &[&str]) -> Vec<Symbol> {
    (0..1u32 << atoms.len())
        .map(|m| atoms.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, a)| a.to_string()).collect())
        .collect()
}

/// All words of length exactly `len` over `symbols`.
pub fn words(symbols: &[Symbol], len: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                symbols.iter().map(move |s| {
                    let mut v = w.clone();
                    v.push(s.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// All lassos `(prefix, loop)` with `|prefix| <= max_prefix` and
/// `1 <= |loop| <= max_loop`.
pub fn all_lassos(symbols: &[Symbol], max_prefix: usize, max_loop: usize) -> Vec<(Vec<Symbol>, Vec<Symbol>)> {
    let prefixes: Vec<Vec<Symbol>> = (0..=max_prefix).flat_map(|l| words(symbols, l)).collect();
    let loops: Vec<Vec<Symbol>> = (1..=max_loop).flat_map(|l| words(symbols, l)).collect();
    prefixes.iter().flat_map(|p| loops.iter().map(move |l| (p.clone(), l.clone()))).collect()
}

pub fn masks(aut: &BuchiAutomaton, word: &[Symbol]) -> Vec<u64> {
    word.iter().map(|s| aut.mask_of(s.iter().map(String::as_str))).collect()
}

pub fn formula_strategy(atoms: &'static [&'static str]) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        8 => proptest::sample::select(atoms).prop_map(Formula::atom),
        1 => Just(Formula::True),
        1 => Just(Formula::False),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            inner.clone().prop_map(Formula::next),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::until(a, b)),
            inner.clone().prop_map(Formula::eventually),
            inner.prop_map(Formula::always),
        ]
    })
}

/// A random formula with exactly `temporal` temporal operators.
pub fn random_formula<R: Rng>(rng: &mut R, atoms: &[&str], temporal: usize) -> Formula {
    if temporal == 0 {
        return match rng.gen_range(0..10) {
            0 => Formula::not(Formula::atom(*atoms.choose(rng).unwrap())),
            1 => Formula::and(Formula::atom(*atoms.choose(rng).unwrap()), Formula::atom(*atoms.choose(rng).unwrap())),
            2 => Formula::or(Formula::atom(*atoms.choose(rng).unwrap()), Formula::not(Formula::atom(*atoms.choose(rng).unwrap()))),
            _ => Formula::atom(*atoms.choose(rng).unwrap()),
        };
    }
    match rng.gen_range(0..9) {
        0 => Formula::next(random_formula(rng, atoms, temporal - 1)),
        1 | 2 => Formula::eventually(random_formula(rng, atoms, temporal - 1)),
        3 | 4 => Formula::always(random_formula(rng, atoms, temporal - 1)),
        5 => {
            let left = rng.gen_range(0..temporal);
            Formula::until(random_formula(rng, atoms, left), random_formula(rng, atoms, temporal - 1 - left))
        }
        6 => {
            let left = rng.gen_range(0..=temporal);
            Formula::and(random_formula(rng, atoms, left), random_formula(rng, atoms, temporal - left))
        }
        7 => {
            let left = rng.gen_range(0..=temporal);
            Formula::or(random_formula(rng, atoms, left), random_formula(rng, atoms, temporal - left))
        }
        _ => Formula::not(random_formula(rng, atoms, temporal)),
    }
}

/// A random well-formed transition system: a Hamiltonian cycle plus random
/// extra edges and self-loops everywhere; each state offers a random subset
/// of `services`.
pub fn random_ts<R: Rng>(rng: &mut R, n: usize, services: &[&str]) -> TransitionSystem {
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order[1..].shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((names[i].clone(), names[i].clone()));
        edges.push((names[order[i]].clone(), names[order[(i + 1) % n]].clone()));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        edges.push((names[a].clone(), names[b].clone()));
    }
    let labels: BTreeMap<String, BTreeSet<String>> = names
        .iter()
        .map(|s| (s.clone(), services.iter().filter(|_| rng.gen_bool(0.4)).map(|x| x.to_string()).collect()))
        .collect();
    let ts = TransitionSystem::new(names.clone(), &names[0], &edges, set(services), labels).unwrap();
    assert!(ts.validate().is_empty());
    ts
}

/// A line of `n` cells `c0 … c{n-1}` with self-loops; `labels` maps cell
/// indices to offered services.
pub fn line(n: usize, labels: &[(usize, &[&str])], services: &[&str]) -> TransitionSystem {
    let states: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((states[i].clone(), states[i].clone()));
        if i + 1 < n {
            edges.push((states[i].clone(), states[i + 1].clone()));
            edges.push((states[i + 1].clone(), states[i].clone()));
        }
    }
    let lab: BTreeMap<String, BTreeSet<String>> = labels.iter().map(|(i, l)| (states[*i].clone(), set(l))).collect();
    TransitionSystem::new(states, "c0", &edges, set(services), lab).unwrap()
}

/// Shortest flagged distance to every product state, by plain layer-by-layer
/// set iteration over walks.
pub fn flagged_distances(p: &ProductSystem, prio: usize) -> Vec<Option<usize>> {
    let n = p.num_states();
    let mut out = vec![None; n];
    let mut layer: BTreeSet<(usize, bool)> = BTreeSet::from([(0, false)]);
    let mut seen = layer.clone();
    for len in 0..=2 * n {
        for (s, f) in &layer {
            if *f && out[*s].is_none() {
                out[*s] = Some(len);
            }
        }
        let next: BTreeSet<(usize, bool)> = layer
            .iter()
            .flat_map(|(s, f)| p.edges(*s).iter().map(move |(sym, d)| (*d, *f || p.serves(prio, *sym))))
            .filter(|x| !seen.contains(x))
            .collect();
        if next.is_empty() {
            break;
        }
        seen.extend(next.iter().copied());
        layer = next;
    }
    out
}

/// Checks `find_plan` against an exhaustive oracle: the plan must end in a
/// maximally progressive state, be a real path with a non-silent step of
/// member `prio`, and be as short as possible.
pub fn plan_oracle(p: &ProductSystem, prio: usize) -> Result<(), String> {
    let dist = flagged_distances(p, prio);
    let v0 = p.value(0);
    let best = (0..p.num_states())
        .filter(|s| dist[*s].is_some() && p.value(*s) > v0)
        .max_by(|x, y| p.value(*x).cmp(&p.value(*y)).then(dist[*y].cmp(&dist[*x])).then(y.cmp(x)));
    let plan = p.find_plan(prio);
    match (best, &plan) {
        (None, None) => Ok(()),
        (Some(b), Some(plan)) => {
            let real = plan.symbols.iter().enumerate().all(|(j, sym)| p.edges(plan.states[j]).contains(&(*sym, plan.states[j + 1])));
            if *plan.states.last().unwrap() != b || Some(plan.len()) != dist[b] || plan.states[0] != 0 || !real {
                return Err(format!("plan {plan:?} differs from oracle target {b} at distance {:?}", dist[b]));
            }
            if !p.project(plan, prio).events.iter().any(|e| !e.is_silent()) {
                return Err("plan never serves the priority member".into());
            }
            Ok(())
        }
        _ => Err(format!("plan {plan:?} but oracle target {best:?}")),
    }
}
