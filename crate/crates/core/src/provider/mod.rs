//! Text-generation and embedding providers.
//!
//! Three implementations share the [`TextProvider`] trait: a deterministic
//! [`ScriptedProvider`] for tests and offline runs, a [`ReplayProvider`] that
//! plays back a recorded tape, and a [`RemoteProvider`] speaking the HTTP
//! chat-completion protocol.

mod hashing;
mod json;
mod log;
mod remote;
mod replay;
mod scripted;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::hashing::{hashed_embedding, stable_hash};
pub use self::json::{extract_payload, FieldSpec};
pub use self::log::{CallLog, LoggedCall};
pub use self::remote::{outbound_request_count, RemoteConfig, RemoteProvider};
pub use self::replay::{RecordingProvider, ReplayProvider, TapeEntry};
pub use self::scripted::{Matcher, ScriptEntry, ScriptedProvider};

/// Structured numeric fields attached to a generation.
pub type Payload = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("no script entry matches prompt: {prompt}")]
    ScriptMiss { prompt: String },
    #[error("provider configuration error: {0}")]
    Config(String),
    #[error("malformed provider output ({message}): {raw}")]
    Parse { message: String, raw: String },
    #[error("replay tape exhausted at call {index}")]
    TapeExhausted { index: usize },
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    /// Whether the caller may retry the same request.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transient(_) | ProviderError::Exhausted { .. } => true,
            ProviderError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Sampling parameters for one call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
}

impl SamplingParams {
    /// Module-level calls.
    pub const MODULE: SamplingParams = SamplingParams {
        temperature: 0.9,
        max_tokens: 200,
        top_p: 1.0,
    };

    /// The final response call.
    pub const RESPONSE: SamplingParams = SamplingParams {
        temperature: 0.7,
        max_tokens: 200,
        top_p: 1.0,
    };

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens must be > 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProviderError::InvalidRequest(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_prompt: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
}

impl GenerationRequest {
    pub fn new(
        system_prompt: impl Into<String>,
        messages: Vec<Message>,
        params: SamplingParams,
    ) -> Result<Self, ProviderError> {
        let request = Self {
            system_prompt: system_prompt.into(),
            messages,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            top_p: params.top_p,
        };
        request.validate()?;
        Ok(request)
    }

    pub fn params(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            top_p: self.top_p,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        self.params().validate()?;
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("messages must be non-empty".into()));
        }
        if self.messages.windows(2).any(|w| w[0].role == w[1].role) {
            return Err(ProviderError::InvalidRequest("message roles must alternate".into()));
        }
        Ok(())
    }

    /// System prompt and all messages joined, used for matching and hashing.
    pub fn transcript(&self) -> String {
        let mut out = self.system_prompt.clone();
        for m in &self.messages {
            out.push('\n');
            out.push_str(&m.content);
        }
        out
    }
}

/// Collapse consecutive same-role messages so roles alternate.
pub fn alternate_roles(messages: impl IntoIterator<Item = Message>) -> Vec<Message> {
    let mut out: Vec<Message> = Vec::new();
    for m in messages {
        match out.last_mut() {
            Some(last) if last.role == m.role => {
                last.content.push('\n');
                last.content.push_str(&m.content);
            }
            _ => out.push(m),
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    #[serde(default)]
    pub payload: Payload,
}

/// Uniform interface for text generation and embeddings.
///
/// Implementations must tolerate concurrent calls from many agents.
pub trait TextProvider: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError>;

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;

    fn is_available(&self) -> bool {
        true
    }
}

impl<P: TextProvider + ?Sized> TextProvider for Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        (**self).generate(request)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        (**self).embed(text)
    }

    fn is_available(&self) -> bool {
        (**self).is_available()
    }
}

impl<P: TextProvider + ?Sized> TextProvider for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        (**self).generate(request)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        (**self).embed(text)
    }

    fn is_available(&self) -> bool {
        (**self).is_available()
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        assert!(GenerationRequest::new("s", vec![], SamplingParams::MODULE).is_err());
        assert!(GenerationRequest::new(
            "s",
            vec![Message::user("a"), Message::user("b")],
            SamplingParams::MODULE
        )
        .is_err());
        let mut bad = SamplingParams::MODULE;
        bad.temperature = 2.5;
        assert!(GenerationRequest::new("s", vec![Message::user("a")], bad).is_err());
        bad = SamplingParams::MODULE;
        bad.top_p = 0.0;
        assert!(GenerationRequest::new("s", vec![Message::user("a")], bad).is_err());
        assert!(GenerationRequest::new(
            "s",
            vec![Message::assistant("a"), Message::user("b")],
            SamplingParams::RESPONSE
        )
        .is_ok());
    }

    #[test]
    fn alternation_merges_runs() {
        let merged = alternate_roles(vec![
            Message::user("a"),
            Message::assistant("b"),
            Message::assistant("c"),
            Message::user("d"),
        ]);
        assert_eq!(merged.len(), 3);
        assert_eq!(merged[1].content, "b\nc");
    }

    #[test]
    fn retryability() {
        assert!(ProviderError::Transient("x".into()).is_retryable());
        assert!(ProviderError::Http { status: 503, body: String::new() }.is_retryable());
        assert!(!ProviderError::Http { status: 400, body: String::new() }.is_retryable());
        assert!(!ProviderError::ScriptMiss { prompt: String::new() }.is_retryable());
    }
}
