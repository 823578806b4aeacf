use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    analyze, apply_update, check_option, finalize, next_scenario, Analysis, AssessmentConfig, AssessmentError,
    FinalProfile, Next, Scenario, ScenarioPool, TraitEstimate, TraitEstimateState, UserInput,
};
use crate::provider::TextProvider;
use crate::types::PerTrait;

/// One user action: a choice, optionally with a free-text follow-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentEvent {
    pub seq: usize,
    pub scenario_id: String,
    pub option_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
    pub analyses: Vec<Analysis>,
    pub post_state: PerTrait<TraitEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub event: AssessmentEvent,
    pub next: Option<Scenario>,
    pub done: bool,
    pub low_confidence: bool,
}

/// A single-owner assessment run over a scenario pool.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentSession {
    pub id: String,
    pub config: AssessmentConfig,
    pool: ScenarioPool,
    state: TraitEstimateState,
    current: Option<String>,
    low_confidence: bool,
}

impl AssessmentSession {
    pub fn start(id: impl Into<String>, pool: ScenarioPool, config: AssessmentConfig) -> Result<Self, AssessmentError> {
        config.validate()?;
        let mut s = Self {
            id: id.into(),
            config,
            pool,
            state: TraitEstimateState::default(),
            current: None,
            low_confidence: false,
        };
        s.advance()?;
        Ok(s)
    }

    fn advance(&mut self) -> Result<(), AssessmentError> {
        match next_scenario(&self.state, &self.pool, &self.config)? {
            Next::Scenario(s) => self.current = Some(s.id.clone()),
            Next::Done { low_confidence } => {
                self.current = None;
                self.low_confidence = low_confidence;
            }
        }
        Ok(())
    }

    pub fn current_scenario(&self) -> Option<&Scenario> {
        self.current.as_deref().and_then(|id| self.pool.get(id))
    }

    pub fn is_done(&self) -> bool {
        self.current.is_none()
    }

    pub fn low_confidence(&self) -> bool {
        self.low_confidence
    }

    pub fn state(&self) -> &TraitEstimateState {
        &self.state
    }

    pub fn display_profile(&self) -> PerTrait<TraitEstimate> {
        self.state.traits
    }

    pub fn events(&self) -> &[AssessmentEvent] {
        &self.state.transcript
    }

    /// Analyze and apply one action. The session is unchanged on error.
    pub fn submit(&mut self, option_index: usize, free_text: Option<&str>, provider: &dyn TextProvider) -> Result<Step, AssessmentError> {
        let scenario = self.current_scenario().ok_or(AssessmentError::Finished)?.clone();
        check_option(&scenario, option_index)?;
        let free_text = free_text.map(str::trim).filter(|t| !t.is_empty());
        let mut analyses = vec![analyze(&scenario, &UserInput::Choice { option_index }, provider)?];
        if let Some(text) = free_text {
            let input = UserInput::FreeText {
                option_index,
                text: text.to_string(),
            };
            analyses.push(analyze(&scenario, &input, provider)?);
        }
        let event = AssessmentEvent {
            seq: self.state.transcript.len(),
            scenario_id: scenario.id.clone(),
            option_index,
            free_text: free_text.map(str::to_string),
            post_state: analyses.iter().fold(self.state.traits, |acc, a| apply_update(&acc, &a.deltas)),
            analyses,
        };
        self.commit(event.clone())?;
        Ok(Step {
            event,
            next: self.current_scenario().cloned(),
            done: self.is_done(),
            low_confidence: self.low_confidence,
        })
    }

    fn commit(&mut self, event: AssessmentEvent) -> Result<(), AssessmentError> {
        self.state.traits = event.post_state;
        self.state.scenarios_seen += 1;
        self.state.seen.push(event.scenario_id.clone());
        self.state.transcript.push(event);
        self.advance()
    }

    pub fn finalize(&self) -> Result<FinalProfile, AssessmentError> {
        if !self.is_done() {
            return Err(AssessmentError::NotFinished);
        }
        finalize(&self.state)
    }

    pub fn write_log(&self, mut out: impl Write) -> Result<(), AssessmentError> {
        for e in &self.state.transcript {
            let line = serde_json::to_string(e).map_err(|e| AssessmentError::Io(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| AssessmentError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_log(input: impl BufRead) -> Result<Vec<AssessmentEvent>, AssessmentError> {
        let mut events = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| AssessmentError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(|e| AssessmentError::Replay {
                seq: n,
                reason: e.to_string(),
            })?);
        }
        Ok(events)
    }

    /// Rebuild a session from its event log without calling a provider,
    /// checking that each recorded post-state follows from its deltas.
    pub fn replay(
        id: impl Into<String>,
        pool: ScenarioPool,
        config: AssessmentConfig,
        events: &[AssessmentEvent],
    ) -> Result<Self, AssessmentError> {
        let mut s = Self::start(id, pool, config)?;
        for (n, e) in events.iter().enumerate() {
            let fail = |reason: String| AssessmentError::Replay { seq: n, reason };
            match s.current.as_deref() {
                Some(cur) if cur == e.scenario_id => {}
                Some(cur) => return Err(fail(format!("expected scenario {cur}, log has {}", e.scenario_id))),
                None => return Err(fail("session already finished".into())),
            }
            let post = e.analyses.iter().fold(s.state.traits, |acc, a| apply_update(&acc, &a.deltas));
            if post != e.post_state {
                return Err(fail("post_state does not follow from deltas".into()));
            }
            s.commit(e.clone())?;
        }
        Ok(s)
    }
}
