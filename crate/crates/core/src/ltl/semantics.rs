//! Exact LTL evaluation on ultimately periodic words `prefix · loop^ω`.
//!
//! Positions are folded into `prefix.len() + loop.len()` slots; the successor
//! of the last slot is the start of the loop. Until is a least fixpoint and
//! Always a greatest fixpoint over these slots.

use std::collections::BTreeSet;

use super::Formula;

/// One symbol of a word: the set of services present.
pub type Symbol = BTreeSet<String>;

pub fn symbol(names: &[&str]) -> Symbol {
    names.iter().map(|s| s.to_string()).collect()
}

struct Word<'a> {
    prefix: &'a [Symbol],
    looped: &'a [Symbol],
}

impl Word<'_> {
    fn len(&self) -> usize {
        self.prefix.len() + self.looped.len()
    }

    fn at(&self, i: usize) -> &Symbol {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.looped[i - self.prefix.len()]
        }
    }

    fn succ(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }
}

fn eval(f: &Formula, w: &Word) -> Vec<bool> {
    let n = w.len();
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(a) => (0..n).map(|i| w.at(i).contains(a)).collect(),
        Formula::Not(g) => eval(g, w).into_iter().map(|b| !b).collect(),
        Formula::And(a, b) => eval(a, w).into_iter().zip(eval(b, w)).map(|(x, y)| x && y).collect(),
        Formula::Or(a, b) => eval(a, w).into_iter().zip(eval(b, w)).map(|(x, y)| x || y).collect(),
        Formula::Next(g) => {
            let v = eval(g, w);
            (0..n).map(|i| v[w.succ(i)]).collect()
        }
        Formula::Until(a, b) => until(&eval(a, w), &eval(b, w), w),
        Formula::Eventually(g) => until(&vec![true; n], &eval(g, w), w),
        Formula::Always(g) => {
            let v = eval(g, w);
            let mut out = vec![true; n];
            loop {
                let mut changed = false;
                for i in (0..n).rev() {
                    let x = v[i] && out[w.succ(i)];
                    if x != out[i] {
                        out[i] = x;
                        changed = true;
                    }
                }
                if !changed {
                    return out;
                }
            }
        }
    }
}

fn until(a: &[bool], b: &[bool], w: &Word) -> Vec<bool> {
    let n = w.len();
    let mut out = vec![false; n];
    loop {
        let mut changed = false;
        for i in (0..n).rev() {
            let x = b[i] || (a[i] && out[w.succ(i)]);
            if x != out[i] {
                out[i] = x;
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Whether `prefix · looped^ω` satisfies `f`.
pub fn evaluate_lasso(f: &Formula, prefix: &[Symbol], looped: &[Symbol]) -> bool {
    assert!(!looped.is_empty(), "loop must be nonempty");
    eval(f, &Word { prefix, looped })[0]
}
