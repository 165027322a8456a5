//! LTL formulas over service names: parsing, printing, translation to Büchi
//! automata, and exact evaluation on lasso-shaped words.

mod formula;
mod parser;
mod semantics;
mod translate;

pub use formula::Formula;
pub use parser::parse_formula;
pub use semantics::{evaluate_lasso, symbol, Symbol};
pub use translate::translate;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown atom `{name}` at {position}")]
    UnknownAtom { name: String, position: usize },
}
