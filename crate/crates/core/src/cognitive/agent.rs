use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    argmax, combine_weights, compute_salience, detect_conflicts, generate_response, personality_weights,
    resolve_conflict, response_delta, run_cognitive_module, CognitiveConfig, CognitiveError, CycleTrace,
    GlobalWorkspace, ModuleInput, ModuleResponse,
};
use crate::memory::MemoryStore;
use crate::provider::TextProvider;
use crate::types::{ConversationTurn, DatingAttributes, ModuleKind, PersonalityProfile, TableKey};

/// A simulated participant. Single owner: never run two turns at once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub id: String,
    pub gender: String,
    pub age: Option<u32>,
    pub profile: PersonalityProfile,
    pub attributes: DatingAttributes,
    #[serde(skip)]
    pub memory: MemoryStore,
    #[serde(skip)]
    pub workspace: GlobalWorkspace,
}

impl AgentState {
    pub fn new(id: impl Into<String>, gender: impl Into<String>, profile: PersonalityProfile) -> Self {
        Self {
            id: id.into(),
            gender: gender.into(),
            age: None,
            profile,
            attributes: DatingAttributes::neutral(),
            memory: MemoryStore::default(),
            workspace: GlobalWorkspace::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TurnOutcome {
    pub response: String,
    /// One entry per executed cycle, in order.
    pub traces: Vec<CycleTrace>,
    /// Module responses of the final cycle.
    pub responses: Vec<ModuleResponse>,
}

#[derive(Debug, Error)]
#[error("turn failed after {} cycle(s): {source}", partial_trace.len())]
pub struct TurnError {
    #[source]
    pub source: CognitiveError,
    pub partial_trace: Vec<CycleTrace>,
}

impl TurnError {
    fn new(source: impl Into<CognitiveError>, partial_trace: Vec<CycleTrace>) -> Self {
        Self {
            source: source.into(),
            partial_trace,
        }
    }
}

/// Provider plus tunables; shared by every agent of a run.
#[derive(Clone)]
pub struct Cognition {
    pub provider: Arc<dyn TextProvider>,
    pub config: CognitiveConfig,
}

impl std::fmt::Debug for Cognition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cognition")
            .field("provider", &self.provider.name())
            .field("config", &self.config)
            .finish()
    }
}

impl Cognition {
    pub fn new(provider: Arc<dyn TextProvider>, config: CognitiveConfig) -> Self {
        Self { provider, config }
    }

    fn run_modules(
        &self,
        input: &ModuleInput<'_>,
    ) -> Result<Vec<ModuleResponse>, CognitiveError> {
        ModuleKind::ALL
            .iter()
            .map(|kind| run_cognitive_module(*kind, input, self.provider.as_ref(), &self.config))
            .collect()
    }

    /// Run up to `max_iterations` competition cycles, stopping once module
    /// payloads change by less than `epsilon`, then integrate and reply.
    ///
    /// On success the agent's workspace and memory are updated. On failure
    /// the agent is left untouched and the executed cycles are returned in
    /// the error.
    pub fn process_turn(
        &self,
        agent: &mut AgentState,
        query: &str,
        history: &[ConversationTurn],
    ) -> Result<TurnOutcome, TurnError> {
        let cfg = &self.config;
        cfg.validate().map_err(|e| TurnError::new(e, vec![]))?;
        if query.trim().is_empty() {
            return Err(TurnError::new(CognitiveError::EmptyQuery, vec![]));
        }
        agent.profile.validate().map_err(|e| TurnError::new(e, vec![]))?;
        let provider = self.provider.as_ref();
        let memories = agent
            .memory
            .retrieve(query, cfg.memory_k, agent.profile.openness, provider)
            .map_err(|e| TurnError::new(e, vec![]))?;
        let working: Vec<(String, String)> = agent.memory.working().cloned().collect();
        let personality = personality_weights(&agent.profile, &cfg.personality);

        let mut ws = agent.workspace.clone();
        let mut traces: Vec<CycleTrace> = Vec::new();
        let mut prev: Option<Vec<ModuleResponse>> = None;
        let mut weights = personality;
        for iteration in 0..cfg.max_iterations {
            let fail = |e: CognitiveError, t: &Vec<CycleTrace>| TurnError::new(e, t.clone());
            let input = ModuleInput {
                query,
                history,
                workspace: &ws,
                profile: &agent.profile,
                memories: &memories,
                working: &working,
            };
            let responses = self.run_modules(&input).map_err(|e| fail(e, &traces))?;
            let delta = prev.as_ref().map(|p| response_delta(p, &responses));
            let salience =
                compute_salience(&responses, &agent.profile, &ws, &cfg.salience).map_err(|e| fail(e, &traces))?;
            let combined = combine_weights(&salience.normalized, &personality);
            let matrix = detect_conflicts(&responses, &cfg.conflict).map_err(|e| fail(e, &traces))?;
            let flagged = matrix.above(cfg.conflict.threshold);

            let (content, source, used, conflicts) = if flagged.is_empty() {
                let winner = argmax(&salience.raw);
                (responses[winner.index()].content.clone(), winner, combined, flagged)
            } else {
                let res = resolve_conflict(&matrix, &responses, &combined, &ws, &agent.profile, provider, cfg)
                    .map_err(|e| fail(e, &traces))?;
                if res.adjustment.degenerate {
                    tracing::warn!(agent = %agent.id, iteration, "degenerate conflict");
                }
                let source = argmax(&res.adjustment.weights);
                (res.content, source, res.adjustment.weights, res.adjustment.flagged)
            };
            let trace = CycleTrace {
                iteration,
                salience_raw: salience.raw,
                salience_norm: salience.normalized,
                combined_weights: used,
                conflicts,
                winner: source,
                delta,
            };
            ws.broadcast(&content, source, trace.clone()).map_err(|e| fail(e.into(), &traces))?;
            traces.push(trace);
            weights = used;
            let converged = delta.is_some_and(|d| d < cfg.epsilon);
            prev = Some(responses);
            if converged {
                break;
            }
        }
        let responses = prev.expect("at least one cycle ran");
        let response = generate_response(query, history, &responses, &weights, &agent.profile, &ws, provider, cfg)
            .map_err(|e| TurnError::new(e, traces.clone()))?;
        let emotion = &responses[ModuleKind::Emotion.index()].payload;
        agent
            .memory
            .consolidate(query, &response, emotion, provider)
            .map_err(|e| TurnError::new(e, traces.clone()))?;
        agent.workspace = ws;
        Ok(TurnOutcome {
            response,
            traces,
            responses,
        })
    }
}
