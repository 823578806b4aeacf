use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AssessmentError, Scenario, TraitEstimate};
use crate::provider::{extract_payload, FieldSpec, GenerationRequest, Message, SamplingParams, TextProvider};
use crate::types::{PerTrait, TableKey, Trait};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Choice,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UserInput {
    Choice { option_index: usize },
    FreeText { option_index: usize, text: String },
}

impl UserInput {
    pub fn kind(&self) -> AnalysisKind {
        match self {
            UserInput::Choice { .. } => AnalysisKind::Choice,
            UserInput::FreeText { .. } => AnalysisKind::FreeText,
        }
    }

    fn option_index(&self) -> usize {
        match self {
            UserInput::Choice { option_index } | UserInput::FreeText { option_index, .. } => *option_index,
        }
    }
}

/// Trait deltas read from one provider analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub kind: AnalysisKind,
    pub deltas: PerTrait<TraitEstimate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Set when nothing usable came back; deltas are then all zero-confidence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub raw: String,
}

pub fn check_option(scenario: &Scenario, index: usize) -> Result<(), AssessmentError> {
    if index >= scenario.options.len() {
        return Err(AssessmentError::InvalidOption {
            index,
            count: scenario.options.len(),
        });
    }
    Ok(())
}

fn fields() -> Vec<FieldSpec> {
    Trait::ALL
        .iter()
        .flat_map(|t| [FieldSpec::new(t.key(), 0.0, 100.0), FieldSpec::new(format!("{}_confidence", t.key()), 0.0, 1.0)])
        .collect()
}

pub fn build_analysis_request(scenario: &Scenario, input: &UserInput) -> Result<GenerationRequest, AssessmentError> {
    let i = input.option_index();
    let mut sys = vec![
        match input.kind() {
            AnalysisKind::Choice => "[TRAIT ANALYSIS: CHOICE]".to_string(),
            AnalysisKind::FreeText => "[TRAIT ANALYSIS: FREE TEXT]".to_string(),
        },
        "Estimate Big Five traits from how a person handles an interactive scenario.".to_string(),
        format!("Scenario: {}", scenario.title),
        scenario.prompt.clone(),
        "Options:".to_string(),
    ];
    sys.extend(scenario.options.iter().enumerate().map(|(n, o)| format!("{}. {o}", n + 1)));
    sys.push(format!("Chosen option: {}. {}", i + 1, scenario.options[i]));
    let user = match input {
        UserInput::Choice { .. } => format!("I choose option {}: {}", i + 1, scenario.options[i]),
        UserInput::FreeText { text, .. } => {
            sys.push(format!("Follow-up question: {}", scenario.follow_up(i)));
            text.clone()
        }
    };
    sys.push("Give one line per trait as `trait: value (confidence: c)` with value in 0-100 and c in 0-1.".into());
    sys.push(FieldSpec::render(&fields()));
    GenerationRequest::new(sys.join("\n"), vec![Message::user(user)], SamplingParams::MODULE)
        .map_err(AssessmentError::Provider)
}

fn block_readings(text: &str) -> BTreeMap<Trait, (f64, f64)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"(?im)^[\s\-*]*(openness|conscientiousness|extraversion|agreeableness|neuroticism)\s*:\s*(-?\d+(?:\.\d+)?)\s*\(\s*confidence\s*:\s*(-?\d+(?:\.\d+)?)\s*\)",
        )
        .expect("static regex")
    });
    let mut out = BTreeMap::new();
    for c in re.captures_iter(text) {
        let t = Trait::from_key(&c[1].to_ascii_lowercase()).expect("regex alternation");
        if let (Ok(v), Ok(conf)) = (c[2].parse(), c[3].parse()) {
            out.entry(t).or_insert((v, conf));
        }
    }
    out
}

/// Read trait deltas from a completion: block lines first, then numeric
/// payload keys (`openness`, `openness_confidence`, …).
pub fn parse_analysis(kind: AnalysisKind, text: &str, payload: &crate::provider::Payload) -> Analysis {
    let mut found = block_readings(text);
    let fallback;
    let payload = if payload.is_empty() {
        fallback = extract_payload(text, false).unwrap_or_default();
        &fallback
    } else {
        payload
    };
    for t in Trait::ALL {
        if found.contains_key(t) {
            continue;
        }
        if let (Some(v), Some(c)) = (payload.get(t.key()), payload.get(&format!("{}_confidence", t.key()))) {
            found.insert(*t, (*v, *c));
        }
    }
    let mut warnings = Vec::new();
    let mut deltas = PerTrait::splat(TraitEstimate::UNKNOWN);
    for (t, (v, c)) in &found {
        if !v.is_finite() || !c.is_finite() {
            warnings.push(format!("{t}: non-finite reading ignored"));
            continue;
        }
        let value = v.clamp(0.0, 100.0);
        if value != *v {
            warnings.push(format!("{t} value {v} clamped to {value}"));
        }
        let confidence = c.clamp(0.0, 1.0);
        if confidence != *c {
            warnings.push(format!("{t} confidence {c} clamped to {confidence}"));
        }
        deltas[*t] = TraitEstimate { value, confidence };
    }
    for w in &warnings {
        tracing::warn!(analysis = ?kind, "{w}");
    }
    let parse_error = found.is_empty().then(|| {
        tracing::warn!(analysis = ?kind, "no trait readings in analysis");
        "no trait readings found".to_string()
    });
    Analysis {
        kind,
        deltas,
        warnings,
        parse_error,
        raw: text.to_string(),
    }
}

/// Ask the provider to read traits from one user input.
pub fn analyze(scenario: &Scenario, input: &UserInput, provider: &dyn TextProvider) -> Result<Analysis, AssessmentError> {
    check_option(scenario, input.option_index())?;
    if let UserInput::FreeText { text, .. } = input {
        if text.trim().is_empty() {
            return Err(AssessmentError::EmptyText);
        }
    }
    let request = build_analysis_request(scenario, input)?;
    let out = provider.generate(&request).map_err(AssessmentError::Provider)?;
    Ok(parse_analysis(input.kind(), &out.text, &out.payload))
}
