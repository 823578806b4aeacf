use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ConflictPair;
use crate::types::{ModuleKind, PerModule};

#[derive(Debug, Error, PartialEq)]
pub enum WorkspaceError {
    #[error("broadcast content must be non-empty")]
    EmptyContent,
}

/// The competition state of one executed cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub iteration: usize,
    pub salience_raw: PerModule<f64>,
    pub salience_norm: PerModule<f64>,
    /// Weights actually used for integration, after any conflict adjustment.
    pub combined_weights: PerModule<f64>,
    /// Pairs above the conflict threshold; non-empty means the broadcast
    /// came from a resolution rather than the raw-salience winner.
    pub conflicts: Vec<ConflictPair>,
    pub winner: ModuleKind,
    /// L∞ payload change against the previous cycle; absent on the first.
    pub delta: Option<f64>,
}

/// Shared workspace of one agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalWorkspace {
    pub broadcast_content: String,
    pub broadcast_source: Option<ModuleKind>,
    pub ignition_count: u64,
    pub context_tags: BTreeMap<String, String>,
    pub trace: Vec<CycleTrace>,
}

impl GlobalWorkspace {
    pub fn with_context(context_tags: BTreeMap<String, String>) -> Self {
        Self {
            context_tags,
            ..Self::default()
        }
    }

    /// Ignite: replace the broadcast and append the cycle's trace.
    pub fn broadcast(&mut self, content: &str, source: ModuleKind, trace: CycleTrace) -> Result<(), WorkspaceError> {
        if content.trim().is_empty() {
            return Err(WorkspaceError::EmptyContent);
        }
        self.broadcast_content = content.to_string();
        self.broadcast_source = Some(source);
        self.ignition_count += 1;
        self.trace.push(trace);
        Ok(())
    }
}

/// One trace per line.
pub fn write_traces_jsonl<'a>(
    traces: impl IntoIterator<Item = &'a CycleTrace>,
    mut out: impl Write,
) -> std::io::Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
