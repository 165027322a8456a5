//! Letters, symbols and cube guards.
//!
//! A symbol is a set of letters drawn from an ordered letter list and is
//! stored as a bit mask over that list. Letter lists are always kept sorted by
//! their printed name, so comparing two masks by their sorted member tuples
//! reduces to bit arithmetic (see [`symbol_cmp`]).
//!
//! Transition guards are cubes: a set of letters that must be present and a
//! set that must be absent. A cube that fixes every letter denotes exactly one
//! symbol, so explicitly enumerated transitions are a special case.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound on the number of letters in one alphabet (symbols are `u64`).
pub const MAX_LETTERS: usize = 64;

/// Zero-based agent index. Printed one-based, as in `~1` or `agent=1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Letter {
    Service(String),
    /// The silent marker ε_i of agent i.
    Silent(AgentId),
}

impl Letter {
    pub fn service(name: impl Into<String>) -> Self {
        Letter::Service(name.into())
    }

    /// Parses `~i` (one-based) as a silent marker, anything else as a service.
    pub fn parse(token: &str) -> Option<Letter> {
        let token = token.trim();
        if let Some(rest) = token.strip_prefix('~') {
            let idx: usize = rest.parse().ok()?;
            if idx == 0 {
                return None;
            }
            return Some(Letter::Silent(AgentId(idx - 1)));
        }
        let mut chars = token.chars();
        let first = chars.next()?;
        if !(first.is_ascii_alphabetic() || first == '_') {
            return None;
        }
        if !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return None;
        }
        Some(Letter::Service(token.to_string()))
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, Letter::Silent(_))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Service(s) => f.write_str(s),
            Letter::Silent(a) => write!(f, "~{a}"),
        }
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

/// Mask with the lowest `n` bits set.
pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Orders two symbols by their sorted member tuples, assuming the letter list
/// is sorted by name.
pub fn symbol_cmp(a: u64, b: u64) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let d = (a ^ b).trailing_zeros();
    let above = |m: u64| if d >= 63 { 0 } else { m >> (d + 1) };
    if a & (1 << d) != 0 {
        // `a` has the smaller element at the first difference unless `b`
        // already ended there.
        if above(b) != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    } else if above(a) != 0 {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Renders a symbol as `{a,b}` using the given letter list.
pub fn format_symbol(letters: &[Letter], sym: u64) -> String {
    let members: Vec<String> = letters
        .iter()
        .enumerate()
        .filter(|(i, _)| sym & (1 << i) != 0)
        .map(|(_, l)| l.to_string())
        .collect();
    format!("{{{}}}", members.join(","))
}

/// Builds a mask from letter names; unknown names are ignored.
pub fn mask_of<'a>(letters: &[Letter], names: impl IntoIterator<Item = &'a str>) -> u64 {
    let mut mask = 0;
    for name in names {
        if let Some(i) = letters.iter().position(|l| l.to_string() == name) {
            mask |= 1 << i;
        }
    }
    mask
}

/// Member names of a symbol, in letter order.
pub fn names_of(letters: &[Letter], sym: u64) -> Vec<String> {
    letters
        .iter()
        .enumerate()
        .filter(|(i, _)| sym & (1 << i) != 0)
        .map(|(_, l)| l.to_string())
        .collect()
}

/// A conjunction of letter literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub pos: u64,
    pub neg: u64,
}

impl Cube {
    pub const TOP: Cube = Cube { pos: 0, neg: 0 };

    /// The cube holding exactly `sym` within an alphabet of `full` letters.
    pub fn point(sym: u64, full: u64) -> Cube {
        Cube { pos: sym, neg: full & !sym }
    }

    pub fn contains(&self, sym: u64) -> bool {
        sym & self.pos == self.pos && sym & self.neg == 0
    }

    pub fn is_consistent(&self) -> bool {
        self.pos & self.neg == 0
    }

    pub fn conjoin(&self, other: &Cube) -> Option<Cube> {
        let c = Cube { pos: self.pos | other.pos, neg: self.neg | other.neg };
        c.is_consistent().then_some(c)
    }

    /// `true` when every symbol of `other` is also in `self`.
    pub fn subsumes(&self, other: &Cube) -> bool {
        self.pos & other.pos == self.pos && self.neg & other.neg == self.neg
    }

    pub fn free(&self, full: u64) -> u64 {
        full & !(self.pos | self.neg)
    }

    /// Enumerates member symbols in increasing mask order.
    pub fn symbols(&self, full: u64) -> impl Iterator<Item = u64> {
        let free = self.free(full);
        let pos = self.pos;
        let mut sub: Option<u64> = Some(0);
        std::iter::from_fn(move || {
            let cur = sub?;
            // standard subset walk over the free bits
            let next = (cur.wrapping_sub(free)) & free;
            sub = if next == 0 { None } else { Some(next) };
            Some(pos | cur)
        })
    }

    pub fn count(&self, full: u64) -> u64 {
        1u64 << self.free(full).count_ones().min(63)
    }

    /// Splits `self \ {point}` into disjoint cubes.
    pub fn minus_point(&self, point: u64, full: u64) -> Vec<Cube> {
        if !self.contains(point) {
            return vec![*self];
        }
        let mut out = Vec::new();
        let mut fixed = *self;
        let mut free = self.free(full);
        while free != 0 {
            let bit = free & free.wrapping_neg();
            free &= !bit;
            let mut flipped = fixed;
            if point & bit != 0 {
                flipped.neg |= bit;
            } else {
                flipped.pos |= bit;
            }
            out.push(flipped);
            if point & bit != 0 {
                fixed.pos |= bit;
            } else {
                fixed.neg |= bit;
            }
        }
        out
    }

    /// Merges two cubes into one when their union is itself a cube.
    pub fn merge(&self, other: &Cube) -> Option<Cube> {
        if self.subsumes(other) {
            return Some(*self);
        }
        if other.subsumes(self) {
            return Some(*other);
        }
        // same support, differing in exactly one literal polarity
        if self.pos | self.neg == other.pos | other.neg {
            let diff = self.pos ^ other.pos;
            if diff.count_ones() == 1 {
                return Some(Cube { pos: self.pos & !diff, neg: self.neg & !diff });
            }
        }
        None
    }
}

/// Simplifies a disjunction of cubes by subsumption and adjacent merging.
pub fn simplify_cubes(mut cubes: Vec<Cube>) -> Vec<Cube> {
    cubes.sort();
    cubes.dedup();
    loop {
        let mut changed = false;
        'outer: for i in 0..cubes.len() {
            for j in 0..cubes.len() {
                if i == j {
                    continue;
                }
                if let Some(m) = cubes[i].merge(&cubes[j]) {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    cubes.remove(b);
                    cubes.remove(a);
                    cubes.push(m);
                    changed = true;
                    break 'outer;
                }
            }
        }
        if !changed {
            break;
        }
    }
    cubes.sort();
    cubes
}
