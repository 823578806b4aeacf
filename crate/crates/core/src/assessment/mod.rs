//! Adaptive scenario-based trait assessment.
//!
//! Each answered scenario yields per-trait `(value, confidence)` readings
//! which fold into a confidence-weighted running mean. The next scenario is
//! the one whose trait targets best cover the remaining confidence deficit.

mod analysis;
mod estimate;
mod scenario;
mod session;

use thiserror::Error;

use crate::provider::ProviderError;
use crate::types::ValidationError;

pub use self::analysis::{analyze, build_analysis_request, check_option, parse_analysis, Analysis, AnalysisKind, UserInput};
pub use self::estimate::{
    apply_update, finalize, next_scenario, AssessmentConfig, FinalProfile, Next, TraitEstimate, TraitEstimateState,
};
pub use self::scenario::{Scenario, ScenarioPool};
pub use self::session::{AssessmentEvent, AssessmentSession, Step};

#[derive(Debug, Error)]
pub enum AssessmentError {
    #[error("scenario {id}: {reason}")]
    Scenario { id: String, reason: String },
    #[error("scenario pool: {0}")]
    Pool(String),
    #[error("scenario pool is empty")]
    EmptyPool,
    #[error("option index {index} out of range for {count} options")]
    InvalidOption { index: usize, count: usize },
    #[error("free-text answer is empty")]
    EmptyText,
    #[error("assessment already finished")]
    Finished,
    #[error("assessment not finished")]
    NotFinished,
    #[error("invalid assessment config: {0}")]
    Config(String),
    #[error("provider: {0}")]
    Provider(#[source] ProviderError),
    #[error("replay event {seq}: {reason}")]
    Replay { seq: usize, reason: String },
    #[error("event log: {0}")]
    Io(String),
    #[error("final profile: {0}")]
    Profile(#[source] ValidationError),
}
