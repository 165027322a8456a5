//! Büchi automata over service symbols, graph queries and the text exchange
//! format.

pub mod buchi;
pub mod format;
pub mod graph;
pub mod symbol;

pub use buchi::{Alphabet, BuchiAutomaton, Transition};
pub use graph::{Lasso, Path};
pub use symbol::{AgentId, Cube, Letter};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("too many letters ({0}) for one alphabet")]
    TooManyLetters(usize),
    #[error("duplicate letter in alphabet")]
    DuplicateLetter,
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("transition symbol outside the alphabet")]
    SymbolOutsideAlphabet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
}
