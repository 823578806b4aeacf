//! One agent turn: five modules compete for the global workspace, the
//! winner is broadcast, conflicts are resolved, and a personality-weighted
//! integration produces the reply.

mod agent;
mod config;
mod conflict;
mod convergence;
mod integration;
mod module;
mod preferences;
mod salience;
mod workspace;

use thiserror::Error;

use crate::memory::MemoryError;
use crate::provider::ProviderError;
use crate::types::{ModuleKind, ValidationError};

pub use self::agent::{AgentState, Cognition, TurnError, TurnOutcome};
pub use self::config::{
    CognitiveConfig, ConfigRangeError, ConflictConfig, CrossKeyEntry, FeatureWeights, PersonalityMapping,
    SalienceConfig,
};
pub use self::conflict::{
    adjust_for_conflicts, detect_conflicts, pair_score, resolve_conflict, stance, Adjustment, ConflictMatrix,
    ConflictPair, Resolution,
};
pub use self::convergence::{check_convergence, payload_distance, response_delta};
pub use self::integration::{build_system_prompt, combine_weights, generate_response, integrate_outputs, trait_level};
pub use self::module::{build_module_request, gain_label, run_cognitive_module, ModuleInput, ModuleResponse};
pub use self::preferences::{update_preferences, PreferenceError};
pub use self::salience::{argmax, compute_salience, personality_weights, softmax, SalienceVector};
pub use self::workspace::{write_traces_jsonl, CycleTrace, GlobalWorkspace, WorkspaceError};

#[derive(Debug, Error)]
pub enum CognitiveError {
    #[error("{kind} module call failed: {source}")]
    Module {
        kind: ModuleKind,
        #[source]
        source: ProviderError,
    },
    #[error("{kind} module returned a malformed payload ({message}): {raw}")]
    Parse {
        kind: ModuleKind,
        message: String,
        raw: String,
    },
    #[error("integration call failed: {0}")]
    Integration(#[source] ProviderError),
    #[error("conflict resolution call failed: {0}")]
    Resolution(#[source] ProviderError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error("invalid profile: {0}")]
    Profile(#[from] ValidationError),
    #[error(transparent)]
    Config(#[from] ConfigRangeError),
    #[error("memory: {0}")]
    Memory(#[from] MemoryError),
    #[error("workspace: {0}")]
    Workspace(#[from] WorkspaceError),
}

impl CognitiveError {
    /// Whether re-running the turn may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            CognitiveError::Module { source, .. }
            | CognitiveError::Integration(source)
            | CognitiveError::Resolution(source) => source.is_retryable(),
            CognitiveError::Memory(MemoryError::Provider(source)) => source.is_retryable(),
            _ => false,
        }
    }
}
