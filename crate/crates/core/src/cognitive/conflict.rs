use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::salience::by_kind;
use super::{CognitiveConfig, CognitiveError, ConflictConfig, CrossKeyEntry, GlobalWorkspace, ModuleResponse};
use crate::provider::{GenerationRequest, Message, Payload, TextProvider};
use crate::types::{ModuleKind, PerModule, PersonalityProfile, TableKey};

/// Pairwise stance distances between modules; symmetric, zero diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictMatrix {
    pub scores: PerModule<PerModule<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictPair {
    pub a: ModuleKind,
    pub b: ModuleKind,
    pub score: f64,
}

impl ConflictMatrix {
    pub fn zero() -> Self {
        Self {
            scores: PerModule::splat(PerModule::splat(0.0)),
        }
    }

    pub fn get(&self, a: ModuleKind, b: ModuleKind) -> f64 {
        self.scores[a][b]
    }

    /// All ten unordered pairs in declaration order.
    pub fn pairs(&self) -> Vec<ConflictPair> {
        let mut out = Vec::with_capacity(10);
        for (i, &a) in ModuleKind::ALL.iter().enumerate() {
            for &b in &ModuleKind::ALL[i + 1..] {
                out.push(ConflictPair { a, b, score: self.get(a, b) });
            }
        }
        out
    }

    /// Pairs scoring strictly above `threshold`.
    pub fn above(&self, threshold: f64) -> Vec<ConflictPair> {
        self.pairs().into_iter().filter(|p| p.score > threshold).collect()
    }
}

/// Map a payload value onto `[0, 1]` so different keys are comparable.
/// Valence lives on `[-1, 1]`; everything else is read as `[0, 1]`.
pub fn stance(key: &str, value: f64) -> f64 {
    let v = if key == "valence" { (value + 1.0) / 2.0 } else { value };
    v.clamp(0.0, 1.0)
}

fn cross_weight(table: &[CrossKeyEntry], x: &str, y: &str) -> Option<f64> {
    table
        .iter()
        .find(|e| (e.a == x && e.b == y) || (e.a == y && e.b == x))
        .map(|e| e.weight)
}

/// Mean over comparable key pairs of the stance distance: shared keys
/// count fully, disjoint keys count through the cross-key table. The
/// `confidence` field is not a stance and is ignored.
pub fn pair_score(a: &Payload, b: &Payload, table: &[CrossKeyEntry]) -> f64 {
    let mut total = 0.0;
    let mut terms = 0usize;
    for (ka, &va) in a.iter().filter(|(k, _)| *k != "confidence") {
        if let Some(&vb) = b.get(ka) {
            total += (stance(ka, va) - stance(ka, vb)).abs();
            terms += 1;
        }
    }
    for (ka, &va) in a.iter().filter(|(k, _)| *k != "confidence" && !b.contains_key(*k)) {
        for (kb, &vb) in b.iter().filter(|(k, _)| *k != "confidence" && !a.contains_key(*k)) {
            if let Some(w) = cross_weight(table, ka, kb) {
                total += w * (stance(ka, va) - stance(kb, vb)).abs();
                terms += 1;
            }
        }
    }
    if terms == 0 {
        0.0
    } else {
        (total / terms as f64).clamp(0.0, 1.0)
    }
}

pub fn detect_conflicts(responses: &[ModuleResponse], config: &ConflictConfig) -> Result<ConflictMatrix, CognitiveError> {
    let aligned = by_kind(responses)?;
    let mut m = ConflictMatrix::zero();
    for (i, &a) in ModuleKind::ALL.iter().enumerate() {
        for &b in &ModuleKind::ALL[i + 1..] {
            let s = pair_score(&aligned[a.index()].payload, &aligned[b.index()].payload, &config.cross_keys);
            m.scores[a][b] = s;
            m.scores[b][a] = s;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub weights: PerModule<f64>,
    pub flagged: Vec<ConflictPair>,
    /// Every module was in a flagged pair, so weights fell back to uniform.
    pub degenerate: bool,
}

/// Shrink both members of every flagged pair by `κ·conflict·weight` and
/// hand the freed mass to unflagged modules in proportion to their weight.
pub fn adjust_for_conflicts(weights: &PerModule<f64>, matrix: &ConflictMatrix, config: &ConflictConfig) -> Adjustment {
    let flagged = matrix.above(config.threshold);
    if flagged.is_empty() {
        return Adjustment {
            weights: *weights,
            flagged,
            degenerate: false,
        };
    }
    let mut in_pair = PerModule::splat(false);
    let mut cut = PerModule::splat(0.0);
    for p in &flagged {
        in_pair[p.a] = true;
        in_pair[p.b] = true;
        cut[p.a] += config.adjustment * p.score * weights[p.a];
        cut[p.b] += config.adjustment * p.score * weights[p.b];
    }
    if in_pair.values().all(|f| *f) {
        tracing::warn!("all modules in conflict, falling back to uniform weights");
        return Adjustment {
            weights: PerModule::splat(1.0 / 5.0),
            flagged,
            degenerate: true,
        };
    }
    let mut out = *weights;
    let mut freed = 0.0;
    for m in ModuleKind::ALL {
        let c = cut[*m].min(weights[*m]);
        out[*m] -= c;
        freed += c;
    }
    let receivers: Vec<ModuleKind> = ModuleKind::ALL.iter().copied().filter(|m| !in_pair[*m]).collect();
    let base: f64 = receivers.iter().map(|m| weights[*m]).sum();
    for m in &receivers {
        let share = if base > 0.0 {
            weights[*m] / base
        } else {
            1.0 / receivers.len() as f64
        };
        out[*m] += freed * share;
    }
    let z = out.sum();
    Adjustment {
        weights: out.map(|_, v| v / z),
        flagged,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub content: String,
    pub adjustment: Adjustment,
}

/// Adjust weights and ask the provider for a synthesis of the conflicting
/// stances. The caller guarantees at least one pair is above threshold.
pub fn resolve_conflict(
    matrix: &ConflictMatrix,
    responses: &[ModuleResponse],
    weights: &PerModule<f64>,
    workspace: &GlobalWorkspace,
    profile: &PersonalityProfile,
    provider: &dyn TextProvider,
    config: &CognitiveConfig,
) -> Result<Resolution, CognitiveError> {
    let adjustment = adjust_for_conflicts(weights, matrix, &config.conflict);
    if adjustment.flagged.is_empty() {
        return Err(CognitiveError::Contract("resolve_conflict called without a flagged pair".into()));
    }
    let aligned = by_kind(responses)?;
    let mut sys = String::from("[CONFLICT RESOLUTION]\n");
    sys.push_str("Two or more cognitive modules disagree. Write one short guidance note that keeps both stances.\n");
    let _ = writeln!(
        sys,
        "Agent agreeableness {:.2}, conscientiousness {:.2}.",
        profile.agreeableness, profile.conscientiousness
    );
    if !workspace.broadcast_content.is_empty() {
        let _ = writeln!(sys, "Workspace broadcast: {}", workspace.broadcast_content);
    }
    for p in &adjustment.flagged {
        let _ = writeln!(
            sys,
            "Conflict {:.2}: [{}] {} <> [{}] {}",
            p.score,
            p.a.label(),
            aligned[p.a.index()].content,
            p.b.label(),
            aligned[p.b.index()].content
        );
    }
    let request = GenerationRequest::new(sys, vec![Message::user("Resolve the conflict.")], config.module_sampling)
        .map_err(CognitiveError::Resolution)?;
    let generation = provider.generate(&request).map_err(CognitiveError::Resolution)?;
    let content = if generation.text.trim().is_empty() {
        adjustment
            .flagged
            .iter()
            .map(|p| format!("balance {} with {}", p.a.label(), p.b.label()))
            .collect::<Vec<_>>()
            .join("; ")
    } else {
        generation.text
    };
    Ok(Resolution { content, adjustment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payload(pairs: &[(&str, f64)]) -> Payload {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn reference_weights() -> PerModule<f64> {
        let mut w = PerModule::splat(0.0);
        w[ModuleKind::Emotion] = 0.31;
        w[ModuleKind::Planning] = 0.28;
        w[ModuleKind::Memory] = 0.21;
        w[ModuleKind::SocialNorms] = 0.12;
        w[ModuleKind::GoalTracking] = 0.08;
        w
    }

    #[test]
    fn identical_payloads_do_not_conflict() {
        let p = payload(&[("valence", 0.3), ("arousal", 0.2)]);
        assert_eq!(pair_score(&p, &p, &ConflictConfig::default_cross_keys()), 0.0);
    }

    #[test]
    fn emotion_planning_fixture() {
        let e = payload(&[("valence", -0.5), ("arousal", 0.68)]);
        let p = payload(&[("plan_feasibility", 0.9)]);
        let s = pair_score(&e, &p, &ConflictConfig::default_cross_keys());
        assert!((s - 0.55 * 0.65).abs() < 1e-12);
        assert_eq!(s, pair_score(&p, &e, &ConflictConfig::default_cross_keys()));
    }

    #[test]
    fn no_flag_is_identity() {
        let w = reference_weights();
        let adj = adjust_for_conflicts(&w, &ConflictMatrix::zero(), &ConflictConfig::default());
        assert_eq!(adj.weights, w);
        assert!(adj.flagged.is_empty());
    }

    #[test]
    fn flagged_pair_shifts_mass() {
        let w = reference_weights();
        let mut m = ConflictMatrix::zero();
        m.scores[ModuleKind::Emotion][ModuleKind::Planning] = 0.35;
        m.scores[ModuleKind::Planning][ModuleKind::Emotion] = 0.35;
        let adj = adjust_for_conflicts(&w, &m, &ConflictConfig::default());
        assert!(adj.weights[ModuleKind::Emotion] < w[ModuleKind::Emotion]);
        assert!(adj.weights[ModuleKind::Planning] < w[ModuleKind::Planning]);
        for k in [ModuleKind::Memory, ModuleKind::SocialNorms, ModuleKind::GoalTracking] {
            assert!(adj.weights[k] > w[k]);
        }
        assert!((adj.weights.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_conflict_reduces_equally() {
        let w = PerModule::splat(0.2);
        let mut m = ConflictMatrix::zero();
        m.scores[ModuleKind::Memory][ModuleKind::SocialNorms] = 0.5;
        m.scores[ModuleKind::SocialNorms][ModuleKind::Memory] = 0.5;
        let adj = adjust_for_conflicts(&w, &m, &ConflictConfig::default());
        assert_eq!(adj.weights[ModuleKind::Memory], adj.weights[ModuleKind::SocialNorms]);
        assert!(adj.weights[ModuleKind::Memory] < 0.2);
    }

    #[test]
    fn all_flagged_is_degenerate_uniform() {
        let mut m = ConflictMatrix::zero();
        for a in ModuleKind::ALL {
            for b in ModuleKind::ALL {
                if a != b {
                    m.scores[*a][*b] = 0.9;
                }
            }
        }
        let adj = adjust_for_conflicts(&reference_weights(), &m, &ConflictConfig::default());
        assert!(adj.degenerate);
        assert_eq!(adj.weights, PerModule::splat(0.2));
    }
}
