use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{decide, SessionContext, TurnAccounting};
use crate::cognitive::{stance, AgentState, Cognition, CognitiveError, CycleTrace, GlobalWorkspace, TurnOutcome};
use crate::memory::MemoryKind;
use crate::provider::{FieldSpec, GenerationRequest, Message, Payload};
use crate::types::{Attribute, ConversationTurn, ModuleKind, PerAttribute, TableKey, TurnKind};

/// One agent's end-of-session judgement of its partner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationScores {
    pub e_attr: f64,
    pub e_similar: f64,
    pub e_comfort: f64,
    pub e_interest: f64,
    pub partner_ratings: PerAttribute<f64>,
    pub overall_liking: f64,
}

impl EvaluationScores {
    pub fn evaluation_mean(&self) -> f64 {
        (self.e_attr + self.e_similar + self.e_comfort + self.e_interest) / 4.0
    }
}

/// Running impression of the partner, revised after every round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractionState {
    pub e_attr: f64,
    pub e_similar: f64,
    pub e_comfort: f64,
    pub e_interest: f64,
}

impl Default for AttractionState {
    fn default() -> Self {
        Self {
            e_attr: 0.5,
            e_similar: 0.5,
            e_comfort: 0.5,
            e_interest: 0.5,
        }
    }
}

impl AttractionState {
    /// Step rate toward the latest exchange's readings.
    pub const RATE: f64 = 0.3;

    /// Move toward targets read from the agent's latest module payloads:
    /// attraction from valence, interest from arousal, comfort from
    /// positive-and-calm, similarity from goal alignment.
    pub fn update(&mut self, emotion: &Payload, goal: &Payload) {
        let v = stance("valence", emotion.get("valence").copied().unwrap_or(0.0));
        let a = emotion.get("arousal").copied().unwrap_or(0.5).clamp(0.0, 1.0);
        let g = goal.get("goal_alignment").copied().unwrap_or(0.5).clamp(0.0, 1.0);
        let step = |cur: &mut f64, target: f64| *cur += Self::RATE * (target - *cur);
        step(&mut self.e_attr, v);
        step(&mut self.e_interest, a);
        step(&mut self.e_comfort, (v + 1.0 - a) / 2.0);
        step(&mut self.e_similar, g);
    }
}

/// `0.5·Σ_a importance_a/100 · rating_a/10 + 0.5·mean(e_*)`.
pub fn compatibility_score(importance: &PerAttribute<f64>, scores: &EvaluationScores) -> f64 {
    let weighted: f64 = Attribute::ALL
        .iter()
        .map(|a| importance[*a] / 100.0 * scores.partner_ratings[*a] / 10.0)
        .sum();
    (0.5 * weighted + 0.5 * scores.evaluation_mean()).clamp(0.0, 1.0)
}

fn rating_field(a: Attribute) -> String {
    format!("rating_{}", a.key())
}

/// Ask the agent for its final evaluation of the partner, blend the
/// impression scores with its running impression, score, and remember it.
pub fn evaluate_compatibility(
    agent: &mut AgentState,
    partner: &AgentState,
    history: &[ConversationTurn],
    running: &AttractionState,
    cognition: &Cognition,
) -> Result<(f64, EvaluationScores), CognitiveError> {
    let mut sys = String::from("[COMPATIBILITY EVALUATION]\n");
    let _ = writeln!(sys, "You are {} and have just finished a speed date with {}.", agent.id, partner.id);
    sys.push_str("Your importance allocation:");
    for (a, v) in agent.attributes.importance.iter() {
        let _ = write!(sys, " {a} {v:.1}");
    }
    let _ = writeln!(
        sys,
        "\nRunning impressions: e_attr {:.2}, e_similar {:.2}, e_comfort {:.2}, e_interest {:.2}",
        running.e_attr, running.e_similar, running.e_comfort, running.e_interest
    );
    sys.push_str("Conversation:\n");
    for t in history {
        let _ = writeln!(sys, "{}: {}", t.speaker, t.text);
    }
    let mut fields = vec![
        FieldSpec::new("e_attr", 0.0, 1.0),
        FieldSpec::new("e_similar", 0.0, 1.0),
        FieldSpec::new("e_comfort", 0.0, 1.0),
        FieldSpec::new("e_interest", 0.0, 1.0),
    ];
    fields.extend(Attribute::ALL.iter().map(|a| FieldSpec::new(rating_field(*a), 1.0, 10.0)));
    fields.push(FieldSpec::new("overall_liking", 1.0, 10.0));
    sys.push_str(&FieldSpec::render(&fields));
    let request = GenerationRequest::new(
        sys,
        vec![Message::user(format!("Rate {}.", partner.id))],
        cognition.config.module_sampling,
    )
    .map_err(CognitiveError::Integration)?;
    let g = cognition.provider.generate(&request).map_err(CognitiveError::Integration)?;
    let get = |k: &str| g.payload.get(k).copied().filter(|v| v.is_finite());
    let blend = |k: &str, run: f64| get(k).map(|v| (v.clamp(0.0, 1.0) + run) / 2.0).unwrap_or(run);
    let scores = EvaluationScores {
        e_attr: blend("e_attr", running.e_attr),
        e_similar: blend("e_similar", running.e_similar),
        e_comfort: blend("e_comfort", running.e_comfort),
        e_interest: blend("e_interest", running.e_interest),
        partner_ratings: PerAttribute::from_fn(|a| get(&rating_field(a)).unwrap_or(5.5).clamp(1.0, 10.0)),
        overall_liking: get("overall_liking").unwrap_or(5.5).clamp(1.0, 10.0),
    };
    let score = compatibility_score(&agent.attributes.importance, &scores);
    agent.memory.store(
        MemoryKind::Semantic,
        &format!(
            "Evaluation of {}: compatibility {score:.2}, liking {:.1}",
            partner.id, scores.overall_liking
        ),
        1.0,
        0.0,
        cognition.provider.as_ref(),
    )?;
    Ok((score, scores))
}

/// A completed or partial dyadic conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub agent_i: String,
    pub agent_j: String,
    pub turns: Vec<ConversationTurn>,
    pub evaluations: BTreeMap<String, EvaluationScores>,
    pub compatibility: BTreeMap<String, f64>,
    pub decisions: BTreeMap<String, bool>,
    /// 1 for a first-try success, 2 after a retry.
    pub attempts: u32,
    #[serde(skip)]
    pub traces: BTreeMap<String, Vec<CycleTrace>>,
}

impl SessionRecord {
    fn new(i: &str, j: &str) -> Self {
        Self {
            agent_i: i.to_string(),
            agent_j: j.to_string(),
            turns: Vec::new(),
            evaluations: BTreeMap::new(),
            compatibility: BTreeMap::new(),
            decisions: BTreeMap::new(),
            attempts: 1,
            traces: BTreeMap::from([(i.to_string(), Vec::new()), (j.to_string(), Vec::new())]),
        }
    }

    pub fn is_match(&self) -> bool {
        self.decisions.len() == 2 && self.decisions.values().all(|d| *d)
    }
}

/// Successful session plus the two agents as they ended it.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub record: SessionRecord,
    pub agents: [AgentState; 2],
}

#[derive(Debug, Clone)]
pub struct SessionAbort {
    pub partial: Box<SessionRecord>,
    pub error: String,
    pub retryable: bool,
}

fn opening_prompt(partner: &str, history: &[ConversationTurn]) -> String {
    match history.last() {
        None => format!("You have just sat down with {partner}. Open the conversation."),
        Some(last) => format!(
            "{partner} just said: \"{}\". Keep the conversation going with something to ask {partner}.",
            last.text
        ),
    }
}

struct Dyad<'a> {
    agents: [AgentState; 2],
    record: SessionRecord,
    cognition: &'a Cognition,
}

impl Dyad<'_> {
    fn turn(&mut self, who: usize, kind: TurnKind, query: &str) -> Result<TurnOutcome, CognitiveError> {
        let history = self.record.turns.clone();
        let agent = &mut self.agents[who];
        let out = match self.cognition.process_turn(agent, query, &history) {
            Ok(o) => o,
            Err(e) => {
                if let Some(t) = self.record.traces.get_mut(&agent.id) {
                    t.extend(e.partial_trace);
                }
                return Err(e.source);
            }
        };
        self.record
            .traces
            .get_mut(&agent.id)
            .expect("both agents registered")
            .extend(out.traces.iter().cloned());
        self.record.turns.push(ConversationTurn {
            speaker: agent.id.clone(),
            kind,
            text: out.response.clone(),
        });
        Ok(out)
    }

    /// One agent asks, the other answers; returns the answerer's outcome
    /// and the asker's.
    fn exchange(&mut self, asker: usize, answerer: usize) -> Result<(TurnOutcome, TurnOutcome), CognitiveError> {
        let prompt = opening_prompt(&self.agents[answerer].id, &self.record.turns);
        let q = self.turn(asker, TurnKind::Query, &prompt)?;
        let r = self.turn(answerer, TurnKind::Response, &q.response)?;
        Ok((q, r))
    }
}

/// Run a full conversation between two agents and collect both verdicts.
pub fn run_session(
    agent_i: &AgentState,
    agent_j: &AgentState,
    ctx: &SessionContext,
    cognition: &Cognition,
    threshold: f64,
) -> Result<SessionOutcome, SessionAbort> {
    let mut dyad = Dyad {
        agents: [agent_i.clone(), agent_j.clone()],
        record: SessionRecord::new(&agent_i.id, &agent_j.id),
        cognition,
    };
    if agent_i.id == agent_j.id {
        return Err(SessionAbort {
            partial: Box::new(dyad.record),
            error: "an agent cannot date itself".into(),
            retryable: false,
        });
    }
    let scene = ctx.render_scene();
    for (me, other) in [(0usize, 1usize), (1, 0)] {
        let partner = dyad.agents[other].id.clone();
        dyad.agents[me].workspace = GlobalWorkspace::with_context(BTreeMap::from([
            ("partner".to_string(), partner),
            ("scene".to_string(), scene.clone()),
        ]));
    }
    fn abort(dyad: Dyad<'_>, e: CognitiveError) -> SessionAbort {
        SessionAbort {
            partial: Box::new(dyad.record),
            retryable: e.is_retryable(),
            error: e.to_string(),
        }
    }
    let mut attraction = [AttractionState::default(); 2];
    let mut latest: [Option<TurnOutcome>; 2] = [None, None];
    for r in 1..=ctx.rounds {
        match dyad.exchange(0, 1) {
            Ok((q, a)) => {
                latest[0] = Some(q);
                latest[1] = Some(a);
            }
            Err(e) => return Err(abort(dyad, e)),
        }
        if r < ctx.rounds || ctx.turn_accounting == TurnAccounting::FullRounds {
            match dyad.exchange(1, 0) {
                Ok((q, a)) => {
                    latest[1] = Some(q);
                    latest[0] = Some(a);
                }
                Err(e) => return Err(abort(dyad, e)),
            }
        }
        for who in 0..2 {
            if let Some(out) = &latest[who] {
                let emotion = &out.responses[ModuleKind::Emotion.index()].payload;
                let goal = &out.responses[ModuleKind::GoalTracking.index()].payload;
                attraction[who].update(emotion, goal);
            }
        }
    }
    let history = dyad.record.turns.clone();
    for (me, other) in [(0usize, 1usize), (1, 0)] {
        let partner = dyad.agents[other].clone();
        let result = evaluate_compatibility(&mut dyad.agents[me], &partner, &history, &attraction[me], cognition);
        let (score, eval) = match result {
            Ok(v) => v,
            Err(e) => return Err(abort(dyad, e)),
        };
        let id = dyad.agents[me].id.clone();
        dyad.record.evaluations.insert(id.clone(), eval);
        dyad.record.compatibility.insert(id.clone(), score);
        dyad.record.decisions.insert(id, decide(score, threshold));
    }
    Ok(SessionOutcome {
        record: dyad.record,
        agents: dyad.agents,
    })
}
