use serde::{Deserialize, Serialize};

use super::{CognitiveError, GlobalWorkspace, ModuleResponse, PersonalityMapping, SalienceConfig};
use crate::types::{ModuleKind, PerModule, PersonalityProfile, TableKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalienceVector {
    pub raw: PerModule<f64>,
    pub normalized: PerModule<f64>,
}

/// Temperature-scaled softmax, stable for large logits.
pub fn softmax(logits: &PerModule<f64>, temperature: f64) -> PerModule<f64> {
    let scaled = logits.map(|_, v| v / temperature);
    let max = scaled.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = scaled.map(|_, v| (v - max).exp());
    let z = exp.sum();
    exp.map(|_, v| v / z)
}

/// Index of the largest value; ties go to the earliest module in
/// declaration order.
pub fn argmax(values: &PerModule<f64>) -> ModuleKind {
    let mut best = ModuleKind::ALL[0];
    for &m in &ModuleKind::ALL[1..] {
        if values[m] > values[best] {
            best = m;
        }
    }
    best
}

/// `softmax(base_m + gain·trait_m)` with each module's paired trait.
pub fn personality_weights(profile: &PersonalityProfile, mapping: &PersonalityMapping) -> PerModule<f64> {
    let logits = PerModule::from_fn(|m| mapping.base[m] + mapping.gain * profile.get(m.paired_trait()));
    softmax(&logits, 1.0)
}

/// Align a response list to the five modules, one each.
pub(crate) fn by_kind(responses: &[ModuleResponse]) -> Result<[&ModuleResponse; 5], CognitiveError> {
    let mut slots: [Option<&ModuleResponse>; 5] = [None; 5];
    for r in responses {
        let slot = &mut slots[r.kind.index()];
        if slot.is_some() {
            return Err(CognitiveError::Contract(format!("duplicate {} response", r.kind)));
        }
        *slot = Some(r);
    }
    let mut out = [&responses[0]; 5];
    for m in ModuleKind::ALL {
        out[m.index()] = slots[m.index()]
            .ok_or_else(|| CognitiveError::Contract(format!("missing {m} response")))?;
    }
    Ok(out)
}

/// `raw_m = α_m + β_conf·confidence + β_trait·trait + β_recency·[m was the last broadcast source]`,
/// normalized by softmax at the configured temperature.
pub fn compute_salience(
    responses: &[ModuleResponse],
    profile: &PersonalityProfile,
    workspace: &GlobalWorkspace,
    config: &SalienceConfig,
) -> Result<SalienceVector, CognitiveError> {
    if responses.is_empty() {
        return Err(CognitiveError::Contract("missing Emotion response".into()));
    }
    let aligned = by_kind(responses)?;
    let raw = PerModule::from_fn(|m| {
        let beta = config.beta[m];
        let recency = if workspace.broadcast_source == Some(m) { 1.0 } else { 0.0 };
        config.alpha[m]
            + beta.confidence * aligned[m.index()].confidence
            + beta.trait_gain * profile.get(m.paired_trait())
            + beta.recency * recency
    });
    Ok(SalienceVector {
        raw,
        normalized: softmax(&raw, config.temperature),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::Payload;

    fn responses(conf: [f64; 5]) -> Vec<ModuleResponse> {
        ModuleKind::ALL
            .iter()
            .map(|m| ModuleResponse::new(*m, "c", Payload::new(), conf[m.index()]))
            .collect()
    }

    #[test]
    fn symmetric_inputs_give_uniform() {
        let s = compute_salience(
            &responses([0.6; 5]),
            &PersonalityProfile::neutral(),
            &GlobalWorkspace::default(),
            &SalienceConfig::default(),
        )
        .unwrap();
        for v in s.normalized.values() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_module_is_a_contract_violation() {
        let mut rs = responses([0.5; 5]);
        rs.pop();
        let err = compute_salience(
            &rs,
            &PersonalityProfile::neutral(),
            &GlobalWorkspace::default(),
            &SalienceConfig::default(),
        );
        assert!(matches!(err, Err(CognitiveError::Contract(_))));
    }

    #[test]
    fn recency_favors_previous_source() {
        let mut ws = GlobalWorkspace::default();
        ws.broadcast_source = Some(ModuleKind::GoalTracking);
        let s = compute_salience(&responses([0.5; 5]), &PersonalityProfile::neutral(), &ws, &SalienceConfig::default())
            .unwrap();
        assert_eq!(argmax(&s.raw), ModuleKind::GoalTracking);
    }

    #[test]
    fn dominant_logit_saturates() {
        let w = softmax(&PerModule([10.0, 0.0, 0.0, 0.0, 0.0]), 1.0);
        assert!(w[ModuleKind::Emotion] > 0.999);
    }

    #[test]
    fn tie_break_is_declaration_order() {
        assert_eq!(argmax(&PerModule([0.1, 0.3, 0.3, 0.3, 0.1])), ModuleKind::Memory);
        assert_eq!(argmax(&PerModule::splat(0.0)), ModuleKind::Emotion);
    }

    #[test]
    fn high_neuroticism_weight() {
        let mut p = PersonalityProfile::neutral();
        p.neuroticism = 0.9;
        let w = personality_weights(&p, &PersonalityMapping::default());
        let expected = 0.9f64.exp() / (0.9f64.exp() + 4.0 * 0.5f64.exp());
        assert!((w[ModuleKind::Emotion] - expected).abs() < 1e-12);
        assert!((w[ModuleKind::Emotion] - 0.272).abs() < 5e-4);
    }
}
