//! Placement validation, exhaustive search and continuous reasoning.

mod continuous;
mod search;
mod validate;

pub use continuous::{continuous_step, full_search, triage, ReasoningOutcome, ReasoningStats, Triage, Unplaceable};
pub use search::{search, SearchOutcome};
pub use validate::{validate, Violation, ViolationKind};
