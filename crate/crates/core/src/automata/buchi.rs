use std::collections::{BTreeMap, BTreeSet};

use super::symbol::{full_mask, Cube, Letter, MAX_LETTERS};
use super::AutomatonError;

/// The input alphabet Σ of an automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Alphabet {
    /// Every subset of the letter list.
    Powerset,
    /// An explicit list of symbols, sorted and deduplicated.
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub src: usize,
    pub label: Cube,
    pub dst: usize,
}

/// A nondeterministic Büchi automaton whose transitions carry cube guards
/// over an ordered letter list.
#[derive(Debug, Clone, PartialEq)]
pub struct BuchiAutomaton {
    letters: Vec<Letter>,
    alphabet: Alphabet,
    states: Vec<String>,
    init: usize,
    accepting: Vec<bool>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<usize>>,
}

impl BuchiAutomaton {
    /// Validates and builds an automaton. Letters may come in any order; they
    /// are sorted by name and every guard is remapped accordingly.
    pub fn new(
        letters: Vec<Letter>,
        alphabet: Alphabet,
        states: Vec<String>,
        init: usize,
        accepting: impl IntoIterator<Item = usize>,
        transitions: Vec<Transition>,
    ) -> Result<Self, AutomatonError> {
        if letters.len() > MAX_LETTERS {
            return Err(AutomatonError::TooManyLetters(letters.len()));
        }
        let unique: BTreeSet<&Letter> = letters.iter().collect();
        if unique.len() != letters.len() {
            return Err(AutomatonError::DuplicateLetter);
        }
        let n = states.len();
        if init >= n {
            return Err(AutomatonError::UnknownState(init.to_string()));
        }
        let mut acc = vec![false; n];
        for q in accepting {
            if q >= n {
                return Err(AutomatonError::UnknownState(q.to_string()));
            }
            acc[q] = true;
        }

        let mut order: Vec<usize> = (0..letters.len()).collect();
        order.sort_by(|a, b| letters[*a].cmp(&letters[*b]));
        // old bit index -> new bit index
        let mut remap = vec![0usize; letters.len()];
        for (new, old) in order.iter().enumerate() {
            remap[*old] = new;
        }
        let map = |m: u64| -> u64 {
            let mut out = 0;
            for (old, new) in remap.iter().enumerate() {
                if m & (1 << old) != 0 {
                    out |= 1 << new;
                }
            }
            out
        };
        let sorted_letters: Vec<Letter> = order.iter().map(|i| letters[*i].clone()).collect();
        let full = full_mask(letters.len());

        let alphabet = match alphabet {
            Alphabet::Powerset => Alphabet::Powerset,
            Alphabet::Explicit(syms) => {
                let mut v: Vec<u64> = syms.into_iter().map(map).collect();
                if v.iter().any(|s| s & !full != 0) {
                    return Err(AutomatonError::SymbolOutsideAlphabet);
                }
                v.sort_unstable();
                v.dedup();
                if v.len() as u128 == 1u128 << letters.len() {
                    Alphabet::Powerset
                } else {
                    Alphabet::Explicit(v)
                }
            }
        };

        let mut trans = Vec::with_capacity(transitions.len());
        for t in transitions {
            if t.src >= n {
                return Err(AutomatonError::UnknownState(t.src.to_string()));
            }
            if t.dst >= n {
                return Err(AutomatonError::UnknownState(t.dst.to_string()));
            }
            let label = Cube { pos: map(t.label.pos), neg: map(t.label.neg) };
            if !label.is_consistent() || (label.pos | label.neg) & !full != 0 {
                return Err(AutomatonError::SymbolOutsideAlphabet);
            }
            if let Alphabet::Explicit(syms) = &alphabet {
                if label.count(full) != 1 || syms.binary_search(&label.pos).is_err() {
                    return Err(AutomatonError::SymbolOutsideAlphabet);
                }
            }
            trans.push(Transition { src: t.src, label, dst: t.dst });
        }
        trans.sort_by(|a, b| {
            (a.src, a.dst, a.label.pos, a.label.neg).cmp(&(b.src, b.dst, b.label.pos, b.label.neg))
        });
        trans.dedup();
        let mut outgoing = vec![Vec::new(); n];
        for (i, t) in trans.iter().enumerate() {
            outgoing[t.src].push(i);
        }
        Ok(BuchiAutomaton {
            letters: sorted_letters,
            alphabet,
            states,
            init,
            accepting: acc,
            transitions: trans,
            outgoing,
        })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn full(&self) -> u64 {
        full_mask(self.letters.len())
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Enumerates Σ in mask order.
    pub fn symbols(&self) -> Vec<u64> {
        match &self.alphabet {
            Alphabet::Powerset => Cube::TOP.symbols(self.full()).collect(),
            Alphabet::Explicit(v) => v.clone(),
        }
    }

    pub fn in_alphabet(&self, sym: u64) -> bool {
        match &self.alphabet {
            Alphabet::Powerset => sym & !self.full() == 0,
            Alphabet::Explicit(v) => v.binary_search(&sym).is_ok(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_name(&self, q: usize) -> &str {
        &self.states[q]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.states.len()).filter(|q| self.accepting[*q])
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, q: usize) -> impl Iterator<Item = &Transition> + '_ {
        self.outgoing[q].iter().map(move |i| &self.transitions[*i])
    }

    /// Distinct successor states of `q`, ascending.
    pub fn successors(&self, q: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.outgoing(q).map(|t| t.dst).collect();
        v.dedup();
        v
    }

    /// Membership test for `(q, sym, q') ∈ δ`.
    pub fn has_transition(&self, q: usize, sym: u64, q2: usize) -> bool {
        self.in_alphabet(sym) && self.outgoing(q).any(|t| t.dst == q2 && t.label.contains(sym))
    }

    /// States reachable from `q` on `sym`.
    pub fn post(&self, q: usize, sym: u64) -> Vec<usize> {
        if !self.in_alphabet(sym) {
            return Vec::new();
        }
        let mut v: Vec<usize> = self.outgoing(q).filter(|t| t.label.contains(sym)).map(|t| t.dst).collect();
        v.dedup();
        v
    }

    /// Symbols labelling some transition from `q` to `q2`, as a dense bitset
    /// over all `2^|letters|` masks.
    pub fn symbol_set(&self, q: usize, q2: usize) -> Result<Vec<u64>, AutomatonError> {
        let n = self.letters.len();
        if n > 16 {
            return Err(AutomatonError::TooManyLetters(n));
        }
        let size = 1usize << n;
        let mut bits = vec![0u64; size.div_ceil(64)];
        let full = self.full();
        for t in self.outgoing(q).filter(|t| t.dst == q2) {
            for s in t.label.symbols(full) {
                if self.in_alphabet(s) {
                    bits[(s / 64) as usize] |= 1 << (s % 64);
                }
            }
        }
        Ok(bits)
    }

    /// Bit mask of the letters with the given names (unknown names ignored).
    pub fn mask_of<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> u64 {
        super::symbol::mask_of(&self.letters, names)
    }

    /// Returns a copy restricted to `keep` (which must contain the initial
    /// state), renumbering states in ascending order.
    pub fn restrict(&self, keep: &BTreeSet<usize>) -> BuchiAutomaton {
        let index: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let states = keep.iter().map(|q| self.states[*q].clone()).collect();
        let accepting: Vec<usize> = keep.iter().filter(|q| self.accepting[**q]).map(|q| index[q]).collect();
        let transitions = self
            .transitions
            .iter()
            .filter(|t| keep.contains(&t.src) && keep.contains(&t.dst))
            .map(|t| Transition { src: index[&t.src], label: t.label, dst: index[&t.dst] })
            .collect();
        BuchiAutomaton::new(
            self.letters.clone(),
            self.alphabet.clone(),
            states,
            index[&self.init],
            accepting,
            transitions,
        )
        .expect("restriction of a valid automaton is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters_are_sorted_and_guards_remapped() {
        // letters given as [b, a]; guard requires b
        let aut = BuchiAutomaton::new(
            vec![Letter::service("b"), Letter::service("a")],
            Alphabet::Powerset,
            vec!["0".into(), "1".into()],
            0,
            [1],
            vec![Transition { src: 0, label: Cube { pos: 0b01, neg: 0 }, dst: 1 }],
        )
        .unwrap();
        assert_eq!(aut.letters()[0], Letter::service("a"));
        assert!(aut.has_transition(0, 0b10, 1));
        assert!(!aut.has_transition(0, 0b01, 1));
    }

    #[test]
    fn dangling_state_is_rejected() {
        let err = BuchiAutomaton::new(
            vec![],
            Alphabet::Powerset,
            vec!["0".into()],
            0,
            [],
            vec![Transition { src: 0, label: Cube::TOP, dst: 3 }],
        );
        assert!(matches!(err, Err(AutomatonError::UnknownState(_))));
    }
}
