use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use dyadsim::cognitive::{
    compute_salience, detect_conflicts, AgentState, Cognition, CognitiveConfig, ConflictConfig, GlobalWorkspace,
    ModuleResponse, SalienceConfig,
};
use dyadsim::memory::{MemoryConfig, MemoryKind, MemoryStore};
use dyadsim::provider::{hashed_embedding, Payload, ScriptedProvider};
use dyadsim::types::{ModuleKind, PersonalityProfile, TableKey};

fn responses() -> Vec<ModuleResponse> {
    ModuleKind::ALL
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let payload: Payload = m
                .canonical_keys()
                .iter()
                .map(|(k, lo, hi)| (k.to_string(), lo + (hi - lo) * (i as f64 + 1.0) / 6.0))
                .collect();
            ModuleResponse::new(*m, "view", payload, 0.3 + 0.1 * i as f64)
        })
        .collect()
}

fn competition(c: &mut Criterion) {
    let rs = responses();
    let profile = PersonalityProfile::new(0.6, 0.5, 0.4, 0.7, 0.3);
    let ws = GlobalWorkspace::default();
    let sal = SalienceConfig::default();
    let conflict = ConflictConfig::default();
    c.bench_function("salience", |b| b.iter(|| compute_salience(black_box(&rs), &profile, &ws, &sal).unwrap()));
    c.bench_function("conflict_matrix", |b| b.iter(|| detect_conflicts(black_box(&rs), &conflict).unwrap()));
}

fn memory(c: &mut Criterion) {
    let mut store = MemoryStore::new(MemoryConfig::default());
    for i in 0..500 {
        let text = format!("exchange {i}");
        store
            .store_embedded(MemoryKind::Episodic, &text, hashed_embedding(1, &text, 64), 1.0, (i % 10) as f64 / 10.0)
            .unwrap();
    }
    let q = hashed_embedding(1, "what do you like", 64);
    c.bench_function("rank_500", |b| b.iter(|| store.rank(black_box(&q), 5, 0.6).unwrap()));
}

fn turn(c: &mut Criterion) {
    let cog = Cognition::new(Arc::new(ScriptedProvider::seeded(3)), CognitiveConfig::default());
    let agent = AgentState::new("b", "female", PersonalityProfile::neutral());
    c.bench_function("process_turn", |b| {
        b.iter(|| {
            let mut a = agent.clone();
            cog.process_turn(&mut a, black_box("Tell me about your week."), &[]).unwrap()
        })
    });
}

criterion_group!(benches, competition, memory, turn);
criterion_main!(benches);
