//! Line-oriented automaton exchange format.
//!
//! ```text
//! # comment
//! states: 2
//! names: q0,q1          (optional; default names are 0..n-1)
//! init: q0
//! accepting: q1
//! alphabet: {};{a}
//! q0 -- {} --> q0
//! q0 -- {a} --> q1
//! value: q1 (2, 0)      (optional per-state annotation)
//! ```
//!
//! `~i` inside a symbol is the silent marker of agent `i`. Every transition
//! line carries exactly one symbol; cube guards are expanded on write.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::buchi::{Alphabet, BuchiAutomaton, Transition};
use super::symbol::{format_symbol, symbol_cmp, Cube, Letter};
use super::{AutomatonError, FormatError};

/// Per-state annotation `(k, d)` with `d = None` for −∞.
pub type Annotation = (u32, Option<i64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub automaton: BuchiAutomaton,
    pub values: BTreeMap<usize, Annotation>,
}

fn err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: msg.into() }
}

fn parse_symbol(text: &str, line: usize) -> Result<Vec<Letter>, FormatError> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| err(line, format!("expected a symbol in braces, found `{text}`")))?;
    let mut out = Vec::new();
    for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        out.push(Letter::parse(tok).ok_or_else(|| err(line, format!("bad letter `{tok}`")))?);
    }
    Ok(out)
}

fn parse_value(text: &str, line: usize) -> Result<(String, Annotation), FormatError> {
    let (name, rest) = text
        .trim()
        .split_once(char::is_whitespace)
        .ok_or_else(|| err(line, "expected `value: state (k, d)`"))?;
    let inner = rest
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| err(line, "expected `(k, d)`"))?;
    let (k, d) = inner.split_once(',').ok_or_else(|| err(line, "expected `(k, d)`"))?;
    let k: u32 = k.trim().parse().map_err(|_| err(line, "bad counter value"))?;
    let d = match d.trim() {
        "-inf" => None,
        other => Some(other.parse::<i64>().map_err(|_| err(line, "bad distance value"))?),
    };
    Ok((name.to_string(), (k, d)))
}

/// Reads an automaton, ignoring any `value:` annotations.
pub fn read_automaton(text: &str) -> Result<BuchiAutomaton, FormatError> {
    read_document(text).map(|d| d.automaton)
}

pub fn read_document(text: &str) -> Result<Document, FormatError> {
    let mut count: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    let mut init: Option<(String, usize)> = None;
    let mut accepting: Vec<(String, usize)> = Vec::new();
    let mut alphabet: Option<Vec<Vec<Letter>>> = None;
    let mut transitions: Vec<(String, Vec<Letter>, String, usize)> = Vec::new();
    let mut values: Vec<(String, Annotation, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((src, rest)) = line.split_once("--") {
            let (sym, dst) = rest
                .split_once("-->")
                .ok_or_else(|| err(line_no, "expected `src -- {..} --> dst`"))?;
            let src = src.trim();
            let dst = dst.trim();
            if src.is_empty() || dst.is_empty() {
                return Err(err(line_no, "transition endpoints must be named"));
            }
            transitions.push((src.to_string(), parse_symbol(sym, line_no)?, dst.to_string(), line_no));
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| err(line_no, format!("unrecognised line `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "states" => {
                count = Some(value.parse().map_err(|_| err(line_no, "`states` expects a count"))?);
            }
            "names" => {
                names = Some(value.split(',').map(|s| s.trim().to_string()).collect());
            }
            "init" => init = Some((value.to_string(), line_no)),
            "accepting" => {
                accepting.extend(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| (s.to_string(), line_no)),
                );
            }
            "alphabet" => {
                let syms = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_symbol(s, line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                alphabet = Some(syms);
            }
            "value" => {
                let (name, ann) = parse_value(value, line_no)?;
                values.push((name, ann, line_no));
            }
            other => return Err(err(line_no, format!("unknown header `{other}`"))),
        }
    }

    let count = count.ok_or_else(|| err(0, "missing `states:` header"))?;
    let names = match names {
        Some(n) if n.len() != count => {
            return Err(err(0, format!("`names` lists {} states but `states` is {count}", n.len())));
        }
        Some(n) => n,
        None => (0..count).map(|i| i.to_string()).collect(),
    };
    let lookup = |name: &str, line: usize| -> Result<usize, FormatError> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| FormatError::Validation { line, message: format!("undeclared state `{name}`") })
    };
    let (init_name, init_line) = init.ok_or_else(|| err(0, "missing `init:` header"))?;
    let init = lookup(&init_name, init_line)?;
    let accepting = accepting
        .iter()
        .map(|(n, l)| lookup(n, *l))
        .collect::<Result<Vec<_>, _>>()?;

    // letter universe: alphabet members plus anything used on transitions
    let mut letters: Vec<Letter> = Vec::new();
    let mut note = |l: &Letter| {
        if !letters.contains(l) {
            letters.push(l.clone());
        }
    };
    for s in alphabet.iter().flatten() {
        s.iter().for_each(&mut note);
    }
    for (_, s, _, _) in &transitions {
        s.iter().for_each(&mut note);
    }
    letters.sort();
    let to_mask = |s: &[Letter]| s.iter().fold(0u64, |m, l| m | 1 << letters.iter().position(|x| x == l).unwrap());
    let full = super::symbol::full_mask(letters.len());

    let explicit: Option<Vec<u64>> = alphabet.as_ref().map(|a| a.iter().map(|s| to_mask(s)).collect());
    let mut trans = Vec::new();
    for (src, sym, dst, line) in &transitions {
        let mask = to_mask(sym);
        if let Some(syms) = &explicit {
            if !syms.contains(&mask) {
                return Err(FormatError::Validation {
                    line: *line,
                    message: format!("symbol {} is not in the alphabet", format_symbol(&letters, mask)),
                });
            }
        }
        trans.push(Transition { src: lookup(src, *line)?, label: Cube::point(mask, full), dst: lookup(dst, *line)? });
    }
    let alphabet = match explicit {
        Some(v) => Alphabet::Explicit(v),
        None => Alphabet::Powerset,
    };
    let automaton = BuchiAutomaton::new(letters, alphabet, names, init, accepting, trans)
        .map_err(|e: AutomatonError| FormatError::Validation { line: 0, message: e.to_string() })?;
    let mut vals = BTreeMap::new();
    for (name, ann, line) in values {
        let q = automaton
            .state_index(&name)
            .ok_or_else(|| FormatError::Validation { line, message: format!("undeclared state `{name}`") })?;
        vals.insert(q, ann);
    }
    Ok(Document { automaton, values: vals })
}

pub fn write_automaton(aut: &BuchiAutomaton) -> String {
    write_document(aut, &BTreeMap::new())
}

/// Canonical rendering: transitions sorted by source, symbol, destination.
pub fn write_document(aut: &BuchiAutomaton, values: &BTreeMap<usize, Annotation>) -> String {
    let letters = aut.letters();
    let mut out = String::new();
    let _ = writeln!(out, "states: {}", aut.num_states());
    let default_names = aut.state_names().iter().enumerate().all(|(i, n)| *n == i.to_string());
    if !default_names {
        let _ = writeln!(out, "names: {}", aut.state_names().join(","));
    }
    let _ = writeln!(out, "init: {}", aut.state_name(aut.init()));
    let acc: Vec<&str> = aut.accepting_states().map(|q| aut.state_name(q)).collect();
    let _ = writeln!(out, "accepting: {}", acc.join(","));
    let mut syms = aut.symbols();
    syms.sort_by(|a, b| symbol_cmp(*a, *b));
    let rendered: Vec<String> = syms.iter().map(|s| format_symbol(letters, *s)).collect();
    let _ = writeln!(out, "alphabet: {}", rendered.join(";"));

    let full = aut.full();
    let mut lines: Vec<(usize, u64, usize)> = Vec::new();
    for t in aut.transitions() {
        for s in t.label.symbols(full).filter(|s| aut.in_alphabet(*s)) {
            lines.push((t.src, s, t.dst));
        }
    }
    lines.sort_by(|a, b| a.0.cmp(&b.0).then(symbol_cmp(a.1, b.1)).then(a.2.cmp(&b.2)));
    lines.dedup();
    for (src, sym, dst) in lines {
        let _ = writeln!(
            out,
            "{} -- {} --> {}",
            aut.state_name(src),
            format_symbol(letters, sym),
            aut.state_name(dst)
        );
    }
    for (q, (k, d)) in values {
        let d = d.map_or_else(|| "-inf".to_string(), |d| d.to_string());
        let _ = writeln!(out, "value: {} ({k}, {d})", aut.state_name(*q));
    }
    out
}
