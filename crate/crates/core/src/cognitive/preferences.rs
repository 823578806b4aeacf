//! Post-interaction preference update.
//!
//! With signal `s = η·(2·success − 1)` and per-attribute relevance
//! `r_a = (e_a − mean(e)) / 9` of the partner evidence `e`:
//!
//! - `importance_a ← importance_a · (1 + s·r_a)`, renormalized to 100
//! - `self_a ← clamp(self_a + s·0.1·(e_a − self_a), 1, 10)`
//! - extraversion and agreeableness move by `η·0.05·(2·success − 1)`,
//!   neuroticism by the opposite amount, all clamped to `[0, 1]`

use thiserror::Error;

use crate::types::{Attribute, DatingAttributes, PerAttribute, PersonalityProfile, TableKey, ValidationError};

#[derive(Debug, Error, PartialEq)]
pub enum PreferenceError {
    #[error("learning rate {0} outside (0, 1]")]
    LearningRate(f64),
    #[error("success {0} outside [0, 1]")]
    Success(f64),
    #[error("evidence for {attribute} is {value}, expected [1, 10]")]
    Evidence { attribute: Attribute, value: f64 },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

pub fn update_preferences(
    attrs: &DatingAttributes,
    profile: &PersonalityProfile,
    evidence: &PerAttribute<f64>,
    success: f64,
    eta: f64,
) -> Result<(DatingAttributes, PersonalityProfile), PreferenceError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(PreferenceError::LearningRate(eta));
    }
    if !(0.0..=1.0).contains(&success) {
        return Err(PreferenceError::Success(success));
    }
    for (a, v) in evidence.iter() {
        if !(1.0..=10.0).contains(v) {
            return Err(PreferenceError::Evidence { attribute: a, value: *v });
        }
    }
    let direction = 2.0 * success - 1.0;
    if direction == 0.0 {
        return Ok((attrs.clone(), profile.clone()));
    }
    let signal = eta * direction;
    let mean = evidence.sum() / Attribute::ALL.len() as f64;

    let scaled = PerAttribute::from_fn(|a| {
        let relevance = (evidence[a] - mean) / 9.0;
        attrs.importance[a] * (1.0 + signal * relevance)
    });
    let total = scaled.sum();
    let importance = if total > 0.0 {
        scaled.map(|_, v| v * DatingAttributes::IMPORTANCE_TOTAL / total)
    } else {
        attrs.importance
    };
    let self_ratings = PerAttribute::from_fn(|a| {
        let s = attrs.self_ratings[a];
        (s + signal * 0.1 * (evidence[a] - s)).clamp(1.0, 10.0)
    });

    let drift = eta * 0.05 * direction;
    let mut next = profile.clone();
    next.extraversion = (profile.extraversion + drift).clamp(0.0, 1.0);
    next.agreeableness = (profile.agreeableness + drift).clamp(0.0, 1.0);
    next.neuroticism = (profile.neuroticism - drift).clamp(0.0, 1.0);

    let updated = DatingAttributes { self_ratings, importance };
    updated.validate()?;
    next.validate()?;
    Ok((updated, next))
}
