//! Dual episodic/semantic memory with embedding-similarity retrieval.
//!
//! Retrieval score blends cosine similarity with the item's salience tag:
//! `score = cos(q, item)·(1 − λ) + salience_tag·λ`. The number of items
//! returned widens with openness: `k_eff = round(k·(0.5 + openness))`.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{cosine, Payload, ProviderError, TextProvider};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("memory content must be non-empty")]
    EmptyContent,
    #[error("retrieval breadth k must be at least 1")]
    ZeroK,
    #[error("embedding dimension {got} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding the query failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("memory file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("memory file line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Episodic,
    Semantic,
    Working,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub id: u64,
    pub kind: MemoryKind,
    pub content: String,
    pub embedding: Vec<f64>,
    pub turn_index: u64,
    pub confidence: f64,
    pub salience_tag: f64,
    /// Set when embedding failed at write time; such items are skipped by
    /// retrieval until [`MemoryStore::backfill`] succeeds.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub deferred: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMemory {
    pub item: MemoryItem,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    /// λ, weight of the salience tag against similarity.
    pub salience_blend: f64,
    pub working_capacity: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            salience_blend: 0.3,
            working_capacity: 10,
        }
    }
}

/// Effective retrieval breadth for base breadth `k` at the given openness.
pub fn effective_k(k: usize, openness: f64) -> usize {
    (k as f64 * (0.5 + openness.clamp(0.0, 1.0))).round() as usize
}

/// Per-agent memory store. Single writer; concurrent readers are fine.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MemoryStore {
    items: Vec<MemoryItem>,
    next_id: u64,
    episodic_count: u64,
    dim: Option<usize>,
    #[serde(skip)]
    working: VecDeque<(String, String)>,
    #[serde(skip)]
    config: MemoryConfig,
}

impl MemoryStore {
    pub fn new(config: MemoryConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn items(&self) -> &[MemoryItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn episodic_count(&self) -> usize {
        self.items.iter().filter(|i| i.kind == MemoryKind::Episodic).count()
    }

    /// The bounded ring of recent `(query, response)` exchanges.
    pub fn working(&self) -> impl Iterator<Item = &(String, String)> {
        self.working.iter()
    }

    pub fn push_working(&mut self, query: &str, response: &str) {
        self.working.push_back((query.to_string(), response.to_string()));
        while self.working.len() > self.config.working_capacity {
            self.working.pop_front();
        }
    }

    fn check_dim(&mut self, got: usize) -> Result<(), MemoryError> {
        match self.dim {
            Some(expected) if expected != got => Err(MemoryError::DimensionMismatch { expected, got }),
            Some(_) => Ok(()),
            None => {
                self.dim = Some(got);
                Ok(())
            }
        }
    }

    /// Store an item, embedding its content through `provider`.
    pub fn store(
        &mut self,
        kind: MemoryKind,
        content: &str,
        confidence: f64,
        salience_tag: f64,
        provider: &dyn TextProvider,
    ) -> Result<MemoryItem, MemoryError> {
        if content.trim().is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        let (embedding, deferred) = match provider.embed(content) {
            Ok(e) => {
                self.check_dim(e.len())?;
                (e, false)
            }
            Err(e) => {
                tracing::warn!(error = %e, "embedding failed, deferring");
                (Vec::new(), true)
            }
        };
        Ok(self.insert(kind, content, embedding, deferred, confidence, salience_tag))
    }

    /// Insert an item whose embedding is already known.
    pub fn store_embedded(
        &mut self,
        kind: MemoryKind,
        content: &str,
        embedding: Vec<f64>,
        confidence: f64,
        salience_tag: f64,
    ) -> Result<MemoryItem, MemoryError> {
        if content.trim().is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        let deferred = embedding.is_empty();
        if !deferred {
            self.check_dim(embedding.len())?;
        }
        Ok(self.insert(kind, content, embedding, deferred, confidence, salience_tag))
    }

    fn insert(
        &mut self,
        kind: MemoryKind,
        content: &str,
        embedding: Vec<f64>,
        deferred: bool,
        confidence: f64,
        salience_tag: f64,
    ) -> MemoryItem {
        let turn_index = self.episodic_count;
        if kind == MemoryKind::Episodic {
            self.episodic_count += 1;
        }
        let item = MemoryItem {
            id: self.next_id,
            kind,
            content: content.to_string(),
            embedding,
            turn_index,
            confidence: confidence.clamp(0.0, 1.0),
            salience_tag: salience_tag.clamp(0.0, 1.0),
            deferred,
        };
        self.next_id += 1;
        self.items.push(item.clone());
        item
    }

    /// Append items written elsewhere (e.g. in a session copy of this
    /// store), assigning fresh ids and turn indices.
    pub fn absorb(&mut self, items: &[MemoryItem]) -> Result<(), MemoryError> {
        for i in items {
            self.store_embedded(i.kind, &i.content, i.embedding.clone(), i.confidence, i.salience_tag)?;
        }
        Ok(())
    }

    /// Retry embedding for deferred items; returns how many were filled.
    pub fn backfill(&mut self, provider: &dyn TextProvider) -> Result<usize, MemoryError> {
        let mut filled = 0;
        for i in 0..self.items.len() {
            if !self.items[i].deferred {
                continue;
            }
            if let Ok(e) = provider.embed(&self.items[i].content) {
                self.check_dim(e.len())?;
                let item = &mut self.items[i];
                item.embedding = e;
                item.deferred = false;
                filled += 1;
            }
        }
        Ok(filled)
    }

    /// Rank stored items against an already-embedded query.
    pub fn rank(&self, query: &[f64], k: usize, openness: f64) -> Result<Vec<ScoredMemory>, MemoryError> {
        if k == 0 {
            return Err(MemoryError::ZeroK);
        }
        let lambda = self.config.salience_blend;
        let mut scored: Vec<ScoredMemory> = self
            .items
            .iter()
            .filter(|i| !i.deferred)
            .map(|i| ScoredMemory {
                score: cosine(query, &i.embedding) * (1.0 - lambda) + i.salience_tag * lambda,
                item: i.clone(),
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.item.id.cmp(&b.item.id)));
        scored.truncate(effective_k(k, openness));
        Ok(scored)
    }

    pub fn retrieve(
        &self,
        query: &str,
        k: usize,
        openness: f64,
        provider: &dyn TextProvider,
    ) -> Result<Vec<ScoredMemory>, MemoryError> {
        if k == 0 {
            return Err(MemoryError::ZeroK);
        }
        if self.items.is_empty() {
            return Ok(Vec::new());
        }
        let q = provider.embed(query)?;
        self.rank(&q, k, openness)
    }

    /// Write one episodic item for the exchange, tagged with its emotional
    /// salience `|valence|·0.5 + arousal·0.5`.
    pub fn consolidate(
        &mut self,
        query: &str,
        response: &str,
        emotion: &Payload,
        provider: &dyn TextProvider,
    ) -> Result<MemoryItem, MemoryError> {
        let tag = emotional_salience(emotion);
        self.push_working(query, response);
        self.store(
            MemoryKind::Episodic,
            &format!("Q: {query}\nA: {response}"),
            1.0,
            tag,
            provider,
        )
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), MemoryError> {
        let mut out = BufWriter::new(File::create(path)?);
        for item in &self.items {
            serde_json::to_writer(&mut out, item).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path, config: MemoryConfig) -> Result<Self, MemoryError> {
        let mut store = Self::new(config);
        for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let item: MemoryItem = serde_json::from_str(&line).map_err(|e| MemoryError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
            if !item.deferred {
                store.check_dim(item.embedding.len())?;
            }
            store.next_id = store.next_id.max(item.id + 1);
            if item.kind == MemoryKind::Episodic {
                store.episodic_count = store.episodic_count.max(item.turn_index + 1);
            }
            store.items.push(item);
        }
        Ok(store)
    }
}

/// `|valence|·0.5 + arousal·0.5`, clamped to `[0, 1]`; absent keys count as 0.
pub fn emotional_salience(emotion: &Payload) -> f64 {
    let valence = emotion.get("valence").copied().unwrap_or(0.0);
    let arousal = emotion.get("arousal").copied().unwrap_or(0.0);
    (valence.abs() * 0.5 + arousal * 0.5).clamp(0.0, 1.0)
}
