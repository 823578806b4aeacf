use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CognitiveConfig, CognitiveError, GlobalWorkspace};
use crate::memory::ScoredMemory;
use crate::provider::{extract_payload, FieldSpec, GenerationRequest, Message, Payload, TextProvider};
use crate::types::{ConversationTurn, ModuleKind, PersonalityProfile};

/// Number of most recent conversation turns shown to each module.
pub const HISTORY_WINDOW: usize = 10;

/// A module's local response for one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleResponse {
    pub kind: ModuleKind,
    pub content: String,
    pub payload: Payload,
    pub confidence: f64,
}

impl ModuleResponse {
    pub fn new(kind: ModuleKind, content: impl Into<String>, payload: Payload, confidence: f64) -> Self {
        Self {
            kind,
            content: content.into(),
            payload,
            confidence,
        }
    }
}

/// Everything a module sees besides its own kind.
#[derive(Debug, Clone, Copy)]
pub struct ModuleInput<'a> {
    pub query: &'a str,
    pub history: &'a [ConversationTurn],
    pub workspace: &'a GlobalWorkspace,
    pub profile: &'a PersonalityProfile,
    /// Retrieved long-term memories; only the Memory module shows them.
    pub memories: &'a [ScoredMemory],
    /// Recent `(query, response)` exchanges from working memory.
    pub working: &'a [(String, String)],
}

/// Prompt label of the trait-derived gain each module receives.
pub fn gain_label(kind: ModuleKind) -> &'static str {
    match kind {
        ModuleKind::Emotion => "emotion gain",
        ModuleKind::Memory => "memory breadth",
        ModuleKind::Planning => "planning depth",
        ModuleKind::SocialNorms => "norm strictness",
        ModuleKind::GoalTracking => "goal assertiveness",
    }
}

fn role_text(kind: ModuleKind) -> &'static str {
    match kind {
        ModuleKind::Emotion => {
            "Detect the affective markers in the latest message, place them on valence and arousal, \
             and suggest how strongly to regulate the emotional tone of the reply."
        }
        ModuleKind::Memory => {
            "Relate the latest message to earlier exchanges and stored knowledge, and say which past \
             details the reply should draw on."
        }
        ModuleKind::Planning => {
            "Identify what the speaker is trying to achieve and outline concrete next steps for the reply."
        }
        ModuleKind::SocialNorms => {
            "Judge the social setting and the expected register, and say which conventions the reply \
             should respect."
        }
        ModuleKind::GoalTracking => {
            "Track the agent's own goals for this conversation and rate how well the current exchange \
             serves them."
        }
    }
}

/// Build the module-level generation request.
pub fn build_module_request(
    kind: ModuleKind,
    input: &ModuleInput<'_>,
    config: &CognitiveConfig,
) -> Result<GenerationRequest, CognitiveError> {
    let mut sys = String::new();
    let _ = writeln!(sys, "[{} PROCESSOR]", kind.label());
    let _ = writeln!(sys, "{}", role_text(kind));
    let _ = writeln!(sys, "{}: {:.3}", gain_label(kind), input.profile.get(kind.paired_trait()));
    if !input.workspace.context_tags.is_empty() {
        sys.push_str("Context:\n");
        for (k, v) in &input.workspace.context_tags {
            let _ = writeln!(sys, "- {k}: {v}");
        }
    }
    if input.workspace.broadcast_content.is_empty() {
        sys.push_str("Workspace broadcast: (none yet)\n");
    } else {
        let _ = writeln!(sys, "Workspace broadcast: {}", input.workspace.broadcast_content);
    }
    let start = input.history.len().saturating_sub(HISTORY_WINDOW);
    if start < input.history.len() {
        sys.push_str("Conversation so far:\n");
        for t in &input.history[start..] {
            let _ = writeln!(sys, "{}: {}", t.speaker, t.text);
        }
    }
    if !input.working.is_empty() {
        sys.push_str("Working memory:\n");
        for (q, r) in input.working {
            let _ = writeln!(sys, "- heard: {q} | said: {r}");
        }
    }
    if kind == ModuleKind::Memory && !input.memories.is_empty() {
        sys.push_str("Recalled memories:\n");
        for m in input.memories {
            let _ = writeln!(sys, "- ({:.2}) {}", m.score, m.item.content.replace('\n', " / "));
        }
    }
    let mut fields: Vec<FieldSpec> = kind
        .canonical_keys()
        .iter()
        .map(|(name, lo, hi)| FieldSpec::new(*name, *lo, *hi))
        .collect();
    fields.push(FieldSpec::new("confidence", 0.0, 1.0));
    sys.push_str(&FieldSpec::render(&fields));
    GenerationRequest::new(sys, vec![Message::user(input.query)], config.module_sampling)
        .map_err(|e| CognitiveError::Module { kind, source: e })
}

fn neutral_value(key: &str) -> f64 {
    if key == "valence" {
        0.0
    } else {
        0.5
    }
}

/// Run one module through the provider and normalize its payload.
///
/// Missing canonical keys get neutral values; present ones are clamped to
/// their range. Confidence comes from the `confidence` field (default 0.5).
pub fn run_cognitive_module(
    kind: ModuleKind,
    input: &ModuleInput<'_>,
    provider: &dyn TextProvider,
    config: &CognitiveConfig,
) -> Result<ModuleResponse, CognitiveError> {
    if input.query.trim().is_empty() {
        return Err(CognitiveError::EmptyQuery);
    }
    input.profile.validate()?;
    let request = build_module_request(kind, input, config)?;
    let generation = provider
        .generate(&request)
        .map_err(|source| CognitiveError::Module { kind, source })?;
    let parse_err = |message: &str| CognitiveError::Parse {
        kind,
        message: message.to_string(),
        raw: generation.text.clone(),
    };
    let mut payload = generation.payload.clone();
    if payload.is_empty() {
        payload = extract_payload(&generation.text, config.strict_payloads).map_err(|e| match e {
            crate::provider::ProviderError::Parse { message, .. } => parse_err(&message),
            other => parse_err(&other.to_string()),
        })?;
    }
    if payload.is_empty() {
        return Err(parse_err("no numeric fields"));
    }
    if let Some((k, _)) = payload.iter().find(|(_, v)| !v.is_finite()) {
        return Err(parse_err(&format!("non-finite value for {k}")));
    }
    if generation.text.trim().is_empty() {
        return Err(parse_err("empty content"));
    }
    for (key, lo, hi) in kind.canonical_keys() {
        let v = payload.entry(key.to_string()).or_insert_with(|| neutral_value(key));
        if *v < *lo || *v > *hi {
            tracing::warn!(module = %kind, key, value = *v, "clamping payload value");
            *v = v.clamp(*lo, *hi);
        }
    }
    let confidence = payload.get("confidence").copied().unwrap_or(0.5).clamp(0.0, 1.0);
    Ok(ModuleResponse {
        kind,
        content: generation.text,
        payload,
        confidence,
    })
}
