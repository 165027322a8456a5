use std::collections::BTreeSet;
use std::fmt;

/// LTL over service atoms. `And`, `Eventually`, `Always` and the constants
/// are derived forms kept in the tree so formulas print back as written.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    /// Atom names occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Not(f) | Formula::Next(f) | Formula::Eventually(f) | Formula::Always(f) => {
                f.collect_atoms(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Number of X, U, F and G operators.
    pub fn temporal_depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(f) => f.temporal_depth(),
            Formula::Next(f) | Formula::Eventually(f) | Formula::Always(f) => 1 + f.temporal_depth(),
            Formula::And(a, b) | Formula::Or(a, b) => a.temporal_depth() + b.temporal_depth(),
            Formula::Until(a, b) => 1 + a.temporal_depth() + b.temporal_depth(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until(..) => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for Formula {
    /// Prints with the minimal parentheses needed to parse back to the same
    /// tree (binary operators are printed left-nested for `&`/`|` and
    /// right-nested for `U`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, sub: &Formula, need: bool| {
            if need {
                write!(f, "({sub})")
            } else {
                write!(f, "{sub}")
            }
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => f.write_str(a),
            Formula::Not(x) | Formula::Next(x) | Formula::Eventually(x) | Formula::Always(x) => {
                let op = match self {
                    Formula::Not(_) => "!",
                    Formula::Next(_) => "X ",
                    Formula::Eventually(_) => "F ",
                    _ => "G ",
                };
                f.write_str(op)?;
                wrap(f, x, x.precedence() < 4)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let (op, p) = if matches!(self, Formula::And(..)) { (" & ", 2) } else { (" | ", 1) };
                wrap(f, a, a.precedence() < p)?;
                f.write_str(op)?;
                wrap(f, b, b.precedence() <= p)
            }
            Formula::Until(a, b) => {
                wrap(f, a, a.precedence() <= 3)?;
                f.write_str(" U ")?;
                wrap(f, b, b.precedence() < 3)
            }
        }
    }
}
