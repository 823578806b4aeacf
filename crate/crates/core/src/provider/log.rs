use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::GenerationRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCall {
    pub seq: u64,
    pub request: GenerationRequest,
}

/// Append-only record of every outbound generation request.
#[derive(Debug, Default)]
pub struct CallLog {
    counter: AtomicU64,
    calls: Mutex<Vec<LoggedCall>>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `request` and returns its sequence number.
    pub fn record(&self, request: &GenerationRequest) -> u64 {
        let seq = self.counter.fetch_add(1, Ordering::SeqCst);
        self.calls
            .lock()
            .expect("call log poisoned")
            .push(LoggedCall {
                seq,
                request: request.clone(),
            });
        seq
    }

    pub fn count(&self) -> usize {
        self.counter.load(Ordering::SeqCst) as usize
    }

    /// All calls ordered by sequence number.
    pub fn snapshot(&self) -> Vec<LoggedCall> {
        let mut calls = self.calls.lock().expect("call log poisoned").clone();
        calls.sort_by_key(|c| c.seq);
        calls
    }

    /// Requests whose system prompt contains `needle`.
    pub fn matching(&self, needle: &str) -> Vec<LoggedCall> {
        self.snapshot()
            .into_iter()
            .filter(|c| c.request.system_prompt.contains(needle))
            .collect()
    }

    pub fn clear(&self) {
        self.calls.lock().expect("call log poisoned").clear();
        self.counter.store(0, Ordering::SeqCst);
    }
}
