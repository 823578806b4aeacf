use std::fmt::Write as _;

use super::salience::by_kind;
use super::{personality_weights, CognitiveConfig, CognitiveError, GlobalWorkspace, ModuleResponse, SalienceVector};
use crate::provider::{GenerationRequest, Message, TextProvider};
use crate::types::{ConversationTurn, ModuleKind, PerModule, PersonalityProfile, TableKey, Trait};

use super::module::HISTORY_WINDOW;

/// Average of normalized salience and personality weights.
pub fn combine_weights(salience: &PerModule<f64>, personality: &PerModule<f64>) -> PerModule<f64> {
    PerModule::from_fn(|m| (salience[m] + personality[m]) / 2.0)
}

/// Verbal band for a trait value.
pub fn trait_level(v: f64) -> &'static str {
    match v {
        v if v < 0.2 => "very low",
        v if v < 0.4 => "low",
        v if v < 0.6 => "moderate",
        v if v < 0.8 => "high",
        _ => "very high",
    }
}

fn trait_name(t: Trait) -> &'static str {
    match t {
        Trait::Openness => "Openness",
        Trait::Conscientiousness => "Conscientiousness",
        Trait::Extraversion => "Extraversion",
        Trait::Agreeableness => "Agreeableness",
        Trait::Neuroticism => "Neuroticism",
    }
}

/// System prompt for the response call: personality block, workspace focus,
/// then each module's content annotated with its weight, heaviest first.
pub fn build_system_prompt(
    profile: &PersonalityProfile,
    responses: &[ModuleResponse],
    weights: &PerModule<f64>,
    workspace: &GlobalWorkspace,
    history: &[ConversationTurn],
) -> Result<String, CognitiveError> {
    let aligned = by_kind(responses)?;
    let mut sys = String::from("You are a cognitive agent with the following personality:\n");
    if let Some(mbti) = &profile.mbti_label {
        let _ = writeln!(sys, "MBTI Type: {mbti}");
    }
    sys.push_str("Big 5 Traits:\n");
    for t in Trait::ALL {
        let v = profile.get(*t);
        let _ = writeln!(sys, "- {}: {} ({v:.2})", trait_name(*t), trait_level(v));
    }
    for (k, v) in &workspace.context_tags {
        let _ = writeln!(sys, "Context {k}: {v}");
    }
    if !workspace.broadcast_content.is_empty() {
        let _ = writeln!(sys, "\nCurrent focus: {}", workspace.broadcast_content);
    }
    let mut order: Vec<ModuleKind> = ModuleKind::ALL.to_vec();
    // stable sort keeps declaration order among equal weights
    order.sort_by(|a, b| weights[*b].total_cmp(&weights[*a]));
    sys.push('\n');
    for m in order {
        let _ = writeln!(
            sys,
            "[{} MODULE] (Contribution: {:.2}): {}",
            m.label(),
            weights[m],
            aligned[m.index()].content
        );
    }
    let start = history.len().saturating_sub(HISTORY_WINDOW);
    if start < history.len() {
        sys.push_str("\nConversation so far:\n");
        for t in &history[start..] {
            let _ = writeln!(sys, "{}: {}", t.speaker, t.text);
        }
    }
    sys.push_str("\nReply in character to the latest message in one or two sentences.");
    Ok(sys)
}

/// Final response call using already-combined weights.
#[allow(clippy::too_many_arguments)]
pub fn generate_response(
    query: &str,
    history: &[ConversationTurn],
    responses: &[ModuleResponse],
    weights: &PerModule<f64>,
    profile: &PersonalityProfile,
    workspace: &GlobalWorkspace,
    provider: &dyn TextProvider,
    config: &CognitiveConfig,
) -> Result<String, CognitiveError> {
    let sys = build_system_prompt(profile, responses, weights, workspace, history)?;
    let request = GenerationRequest::new(sys, vec![Message::user(query)], config.response_sampling)
        .map_err(CognitiveError::Integration)?;
    let g = provider.generate(&request).map_err(CognitiveError::Integration)?;
    Ok(g.text)
}

/// Combine salience with personality weights and generate the reply.
#[allow(clippy::too_many_arguments)]
pub fn integrate_outputs(
    query: &str,
    history: &[ConversationTurn],
    responses: &[ModuleResponse],
    salience: &SalienceVector,
    profile: &PersonalityProfile,
    workspace: &GlobalWorkspace,
    provider: &dyn TextProvider,
    config: &CognitiveConfig,
) -> Result<(String, PerModule<f64>), CognitiveError> {
    let combined = combine_weights(&salience.normalized, &personality_weights(profile, &config.personality));
    let text = generate_response(query, history, responses, &combined, profile, workspace, provider, config)?;
    Ok((text, combined))
}
