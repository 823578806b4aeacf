use std::io::Write;

use super::{EventResult, SimulationError};
use crate::cognitive::write_traces_jsonl;

impl EventResult {
    /// Deterministic pretty JSON of the whole event.
    pub fn to_json(&self) -> Result<String, SimulationError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SimulationError> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per session: ids, both scores, both decisions, match.
    pub fn write_summary_csv(&self, out: impl Write) -> Result<(), SimulationError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["agent_i", "agent_j", "score_i", "score_j", "decision_i", "decision_j", "match", "attempts"])?;
        for s in &self.sessions {
            w.write_record([
                s.agent_i.clone(),
                s.agent_j.clone(),
                format!("{:.6}", s.compatibility[&s.agent_i]),
                format!("{:.6}", s.compatibility[&s.agent_j]),
                s.decisions[&s.agent_i].to_string(),
                s.decisions[&s.agent_j].to_string(),
                s.is_match().to_string(),
                s.attempts.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Every captured cycle trace, session by session, first agent first.
    pub fn write_traces(&self, mut out: impl Write) -> Result<(), SimulationError> {
        for s in &self.sessions {
            for id in [&s.agent_i, &s.agent_j] {
                if let Some(t) = s.traces.get(id) {
                    write_traces_jsonl(t, &mut out)?;
                }
            }
        }
        Ok(())
    }
}
