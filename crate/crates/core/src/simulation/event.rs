use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_match_matrix, generate_pairs, run_session, MatchMatrix, PairCriteria, SessionAbort, SessionContext,
    SessionOutcome, SessionRecord, SimulationError,
};
use crate::cognitive::{update_preferences, AgentState, Cognition};
use crate::types::{DatingAttributes, PerAttribute, PersonalityProfile};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventConfig {
    pub context: SessionContext,
    pub batch_size: usize,
    /// Decision threshold on the `[0, 1]` compatibility score.
    pub threshold: f64,
    pub criteria: PairCriteria,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            context: SessionContext::default(),
            batch_size: 4,
            threshold: 0.5,
            criteria: PairCriteria::Heterosexual,
        }
    }
}

impl EventConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.batch_size == 0 {
            return Err(SimulationError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(SimulationError::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        self.context.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventProgress {
    pub completed: usize,
    pub total: usize,
    pub batch: usize,
    pub batches: usize,
}

impl EventProgress {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.completed as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub gender: String,
    pub age: Option<u32>,
}

/// Preference state of one agent at a measurement time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub importance: PerAttribute<f64>,
    pub self_ratings: PerAttribute<f64>,
    pub profile: PersonalityProfile,
}

impl AgentSnapshot {
    pub fn of(agent: &AgentState) -> Self {
        Self {
            importance: agent.attributes.importance,
            self_ratings: agent.attributes.self_ratings,
            profile: agent.profile.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedSession {
    pub agent_i: String,
    pub agent_j: String,
    pub attempts: u32,
    pub error: String,
    pub partial: SessionRecord,
}

/// Everything an event produced; serializes to the result export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventResult {
    pub participants: Vec<Participant>,
    pub sessions: Vec<SessionRecord>,
    pub aborted: Vec<AbortedSession>,
    pub matches: MatchMatrix,
    /// `T1` before the event, `T2` after.
    pub snapshots: BTreeMap<String, BTreeMap<String, AgentSnapshot>>,
}

fn snapshot(pool: &[AgentState]) -> BTreeMap<String, AgentSnapshot> {
    pool.iter().map(|a| (a.id.clone(), AgentSnapshot::of(a))).collect()
}

fn attempt(a: &AgentState, b: &AgentState, cognition: &Cognition, cfg: &EventConfig) -> Result<SessionOutcome, (u32, SessionAbort)> {
    match run_session(a, b, &cfg.context, cognition, cfg.threshold) {
        Ok(out) => Ok(out),
        Err(first) => {
            tracing::warn!(a = %a.id, b = %b.id, error = %first.error, "session aborted, retrying once");
            match run_session(a, b, &cfg.context, cognition, cfg.threshold) {
                Ok(mut out) => {
                    out.record.attempts = 2;
                    Ok(out)
                }
                Err(second) => Err((2, second)),
            }
        }
    }
}

fn commit(pool: &mut [AgentState], index: usize, start: &AgentState, ended: &AgentState, record: &SessionRecord, eta: f64) -> Result<(), SimulationError> {
    let partner = if record.agent_i == start.id { &record.agent_j } else { &record.agent_i };
    let fresh = &ended.memory.items()[start.memory.len()..];
    let agent = &mut pool[index];
    agent.memory.absorb(fresh)?;
    let evidence = record.evaluations[&start.id].partner_ratings;
    let success = (record.compatibility[&start.id] + record.compatibility[partner]) / 2.0;
    let (attrs, profile): (DatingAttributes, PersonalityProfile) =
        update_preferences(&agent.attributes, &agent.profile, &evidence, success, eta)?;
    agent.attributes = attrs;
    agent.profile = profile;
    Ok(())
}

/// Simulate every eligible pair once.
///
/// Sessions read the pool as it was when the event started, so a batch's
/// sessions are independent and may run concurrently. Between batches,
/// memory writes and preference updates are committed single-threaded in
/// pair-list order, which makes the result independent of `batch_size`.
pub fn run_event(
    pool: &mut [AgentState],
    cognition: &Cognition,
    config: &EventConfig,
    mut progress: impl FnMut(EventProgress),
) -> Result<EventResult, SimulationError> {
    config.validate()?;
    cognition.config.validate().map_err(|e| SimulationError::Config(e.to_string()))?;
    let start: Vec<AgentState> = pool.to_vec();
    let t1 = snapshot(pool);
    let pairs = generate_pairs(&start, &config.criteria);
    let batches = pairs.len().div_ceil(config.batch_size);
    let mut sessions = Vec::with_capacity(pairs.len());
    let mut aborted = Vec::new();
    let eta = cognition.config.learning_rate;
    for (bi, batch) in pairs.chunks(config.batch_size).enumerate() {
        let outcomes: Vec<_> = batch
            .par_iter()
            .map(|&(i, j)| attempt(&start[i], &start[j], cognition, config))
            .collect();
        for (&(i, j), outcome) in batch.iter().zip(outcomes) {
            match outcome {
                Ok(out) => {
                    commit(pool, i, &start[i], &out.agents[0], &out.record, eta)?;
                    commit(pool, j, &start[j], &out.agents[1], &out.record, eta)?;
                    sessions.push(out.record);
                }
                Err((attempts, abort)) => aborted.push(AbortedSession {
                    agent_i: start[i].id.clone(),
                    agent_j: start[j].id.clone(),
                    attempts,
                    error: abort.error,
                    partial: *abort.partial,
                }),
            }
        }
        progress(EventProgress {
            completed: sessions.len() + aborted.len(),
            total: pairs.len(),
            batch: bi + 1,
            batches,
        });
    }
    let mut decisions: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for s in &sessions {
        for (me, other) in [(&s.agent_i, &s.agent_j), (&s.agent_j, &s.agent_i)] {
            decisions.entry(me.clone()).or_default().insert(other.clone(), s.decisions[me]);
        }
    }
    let t2 = snapshot(pool);
    Ok(EventResult {
        participants: pool
            .iter()
            .map(|a| Participant {
                id: a.id.clone(),
                gender: a.gender.clone(),
                age: a.age,
            })
            .collect(),
        sessions,
        aborted,
        matches: build_match_matrix(&decisions),
        snapshots: BTreeMap::from([("T1".to_string(), t1), ("T2".to_string(), t2)]),
    })
}
