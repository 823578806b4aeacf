//! Batched dyadic speed-dating events between cognitive agents.

mod context;
mod event;
mod export;
mod pairing;
mod session;

use thiserror::Error;

use crate::cognitive::PreferenceError;
use crate::memory::MemoryError;

pub use self::context::{build_context, parameter_keys, SessionContext, TurnAccounting};
pub use self::event::{
    run_event, AbortedSession, AgentSnapshot, EventConfig, EventProgress, EventResult, Participant,
};
pub use self::pairing::{build_match_matrix, decide, generate_pairs, MatchMatrix, PairCriteria};
pub use self::session::{
    compatibility_score, evaluate_compatibility, run_session, AttractionState, EvaluationScores, SessionAbort,
    SessionOutcome, SessionRecord,
};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("preference update: {0}")]
    Preference(#[from] PreferenceError),
    #[error("memory merge: {0}")]
    Memory(#[from] MemoryError),
    #[error("export I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("export JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("export CSV: {0}")]
    Csv(#[from] csv::Error),
}
