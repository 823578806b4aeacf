use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CallLog, Generation, GenerationRequest, ProviderError, TextProvider};

/// One line of a JSON-lines tape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TapeEntry {
    Generate {
        request: GenerationRequest,
        response: Generation,
    },
    Embed {
        text: String,
        embedding: Vec<f64>,
    },
}

#[derive(Debug, Default)]
struct Cursor {
    generate: usize,
    embed: usize,
}

/// Plays back a recorded tape: the n-th generation call gets the n-th
/// recorded generation, and likewise for embeddings.
#[derive(Debug)]
pub struct ReplayProvider {
    generations: Vec<Generation>,
    embeddings: Vec<Vec<f64>>,
    cursor: Mutex<Cursor>,
    log: CallLog,
}

impl ReplayProvider {
    pub fn new(entries: Vec<TapeEntry>) -> Self {
        let mut generations = Vec::new();
        let mut embeddings = Vec::new();
        for e in entries {
            match e {
                TapeEntry::Generate { response, .. } => generations.push(response),
                TapeEntry::Embed { embedding, .. } => embeddings.push(embedding),
            }
        }
        Self {
            generations,
            embeddings,
            cursor: Mutex::new(Cursor::default()),
            log: CallLog::new(),
        }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, ProviderError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ProviderError::Config(format!("reading tape: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line)
                .map_err(|e| ProviderError::Config(format!("tape line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let file = File::open(path)
            .map_err(|e| ProviderError::Config(format!("opening {}: {e}", path.display())))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }

    pub fn remaining(&self) -> usize {
        let c = self.cursor.lock().expect("cursor poisoned");
        self.generations.len() - c.generate
    }
}

impl TextProvider for ReplayProvider {
    fn name(&self) -> &str {
        "replay"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        self.log.record(request);
        let mut c = self.cursor.lock().expect("cursor poisoned");
        let index = c.generate;
        let out = self
            .generations
            .get(index)
            .cloned()
            .ok_or(ProviderError::TapeExhausted { index })?;
        c.generate += 1;
        Ok(out)
    }

    fn embed(&self, _text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut c = self.cursor.lock().expect("cursor poisoned");
        let index = c.embed;
        let out = self
            .embeddings
            .get(index)
            .cloned()
            .ok_or(ProviderError::TapeExhausted { index })?;
        c.embed += 1;
        Ok(out)
    }
}

/// Wraps a provider and records every successful call as a tape entry.
#[derive(Debug)]
pub struct RecordingProvider<P> {
    inner: P,
    tape: Mutex<Vec<TapeEntry>>,
}

impl<P: TextProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            tape: Mutex::new(Vec::new()),
        }
    }

    pub fn entries(&self) -> Vec<TapeEntry> {
        self.tape.lock().expect("tape poisoned").clone()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in self.tape.lock().expect("tape poisoned").iter() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl<P: TextProvider> TextProvider for RecordingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        let mut tape = self.tape.lock().expect("tape poisoned");
        let response = self.inner.generate(request)?;
        tape.push(TapeEntry::Generate {
            request: request.clone(),
            response: response.clone(),
        });
        Ok(response)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut tape = self.tape.lock().expect("tape poisoned");
        let embedding = self.inner.embed(text)?;
        tape.push(TapeEntry::Embed {
            text: text.to_string(),
            embedding: embedding.clone(),
        });
        Ok(embedding)
    }

    fn is_available(&self) -> bool {
        self.inner.is_available()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{Message, SamplingParams, ScriptedProvider};

    fn req(n: usize) -> GenerationRequest {
        GenerationRequest::new("s", vec![Message::user(format!("call {n}"))], SamplingParams::MODULE)
            .unwrap()
    }

    #[test]
    fn tape_semantics() {
        let recorder = RecordingProvider::new(ScriptedProvider::seeded(4));
        let originals: Vec<_> = (0..3).map(|i| recorder.generate(&req(i)).unwrap()).collect();
        recorder.embed("hello").unwrap();

        let mut buf = Vec::new();
        recorder.write_jsonl(&mut buf).unwrap();
        let replay = ReplayProvider::from_reader(&buf[..]).unwrap();
        for (i, original) in originals.iter().enumerate() {
            assert_eq!(&replay.generate(&req(100 + i)).unwrap(), original);
        }
        assert!(matches!(
            replay.generate(&req(9)),
            Err(ProviderError::TapeExhausted { index: 3 })
        ));
        assert_eq!(replay.embed("anything").unwrap(), ScriptedProvider::seeded(4).embed("hello").unwrap());
        assert_eq!(replay.log().count(), 4);
    }
}
