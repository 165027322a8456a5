//! Receding-horizon planning for teams of agents with local LTL tasks.

pub mod agent;
pub mod automata;
pub mod backtrack;
pub mod centralized;
pub mod dependency;
pub mod engine;
pub mod harness;
pub mod intersection;
pub mod ltl;
pub mod product;
pub mod scenario;
