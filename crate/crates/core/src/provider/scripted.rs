use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hashing::{hashed_embedding, stable_hash};
use super::{CallLog, FieldSpec, Generation, GenerationRequest, Payload, ProviderError, TextProvider};

/// How a script entry selects the calls it answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Matches when the request transcript contains the string.
    Substring(String),
    /// Matches the n-th generation call (0-based) made through this provider.
    Ordinal(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response_text: String,
    #[serde(default)]
    pub payload: Payload,
}

impl ScriptEntry {
    pub fn substring(needle: impl Into<String>, text: impl Into<String>, payload: Payload) -> Self {
        Self {
            matcher: Matcher::Substring(needle.into()),
            response_text: text.into(),
            payload,
        }
    }

    pub fn ordinal(n: usize, text: impl Into<String>, payload: Payload) -> Self {
        Self {
            matcher: Matcher::Ordinal(n),
            response_text: text.into(),
            payload,
        }
    }
}

const PHRASES: &[&str] = &[
    "I really enjoy trying new restaurants on the weekend.",
    "What got you interested in coming tonight?",
    "I spend a lot of my free time hiking when the weather is good.",
    "That sounds fascinating, tell me more about it.",
    "I'm working on a project at work that keeps me busy.",
    "Do you have any travel plans coming up?",
    "I think a good sense of humour matters a lot.",
    "Honestly I'm a little nervous, this is my first event like this.",
    "I grew up in a small town, so the city still surprises me.",
    "What do you usually do to unwind after a long week?",
    "I've been reading a great book lately.",
    "It's been really nice talking with you so far.",
];

/// Deterministic, test-grade provider.
///
/// Entries are tried in order: ordinal matchers first, then substring
/// matchers in declaration order; the first hit answers the call. A miss is
/// a configuration error in strict mode. Outside strict mode a miss falls
/// back to a seeded responder that fills every numeric field the prompt
/// requests with a value hashed from the full request, so equal requests
/// get equal answers regardless of call order or thread interleaving.
#[derive(Debug)]
pub struct ScriptedProvider {
    entries: Vec<ScriptEntry>,
    strict: bool,
    seed: u64,
    dim: usize,
    log: CallLog,
}

impl ScriptedProvider {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            strict: true,
            seed: 0,
            dim: Self::DEFAULT_DIM,
            log: CallLog::new(),
        }
    }

    /// A provider with no entries that answers everything from the seeded
    /// fallback.
    pub fn seeded(seed: u64) -> Self {
        Self::new(Vec::new()).with_strict(false).with_seed(seed)
    }

    /// Load entries from a JSON array file.
    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("reading {}: {e}", path.display())))?;
        let entries: Vec<ScriptEntry> = serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Config(format!("parsing {}: {e}", path.display())))?;
        Ok(Self::new(entries))
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn push(&mut self, entry: ScriptEntry) {
        self.entries.push(entry);
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }

    fn find(&self, ordinal: usize, transcript: &str) -> Option<&ScriptEntry> {
        self.entries
            .iter()
            .find(|e| e.matcher == Matcher::Ordinal(ordinal))
            .or_else(|| {
                self.entries.iter().find(|e| match &e.matcher {
                    Matcher::Substring(s) => transcript.contains(s.as_str()),
                    Matcher::Ordinal(_) => false,
                })
            })
    }

    fn fallback(&self, request: &GenerationRequest, transcript: &str) -> Generation {
        let fields = FieldSpec::parse_all(&request.system_prompt);
        let mut payload = Payload::new();
        for f in &fields {
            let h = stable_hash(self.seed, &["field", &f.name, transcript]);
            let u = (h >> 11) as f64 / (1u64 << 53) as f64;
            let v = f.lo + u * (f.hi - f.lo);
            payload.insert(f.name.clone(), (v * 100.0).round() / 100.0);
        }
        let phrase = PHRASES[(stable_hash(self.seed, &["text", transcript]) % PHRASES.len() as u64) as usize];
        let text = if payload.is_empty() {
            phrase.to_string()
        } else {
            format!(
                "{phrase} {}",
                serde_json::to_string(&payload).expect("numeric map serializes")
            )
        };
        Generation { text, payload }
    }
}

impl TextProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        request.validate()?;
        let seq = self.log.record(request) as usize;
        let transcript = request.transcript();
        match self.find(seq, &transcript) {
            Some(entry) => Ok(Generation {
                text: entry.response_text.clone(),
                payload: entry.payload.clone(),
            }),
            None if self.strict => {
                let mut prompt: String = transcript.chars().take(160).collect();
                if prompt.len() < transcript.len() {
                    prompt.push('…');
                }
                Err(ProviderError::ScriptMiss { prompt })
            }
            None => Ok(self.fallback(request, &transcript)),
        }
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::InvalidRequest("cannot embed empty text".into()));
        }
        Ok(hashed_embedding(self.seed, text, self.dim))
    }
}
