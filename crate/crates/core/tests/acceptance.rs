//! Acceptance run: one line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so every criterion executes in order
//! and reports its own wall time against its budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dyadsim::assessment::{AssessmentConfig, AssessmentSession, ScenarioPool};
use dyadsim::cognitive::{
    adjust_for_conflicts, argmax, combine_weights, compute_salience, detect_conflicts, personality_weights,
    update_preferences, AgentState, Cognition, CognitiveConfig, ConflictConfig, GlobalWorkspace, ModuleResponse,
    PersonalityMapping, SalienceConfig,
};
use dyadsim::dataset::{export_csv, parse_csv, parse_reader, ColumnMapping};
use dyadsim::metrics::{format_change, format_percent, match_accuracy, pearson, percent_change, ChangeMode, Field};
use dyadsim::metrics::{SnapshotRow, SnapshotTable, TimeLabel};
use dyadsim::provider::{outbound_request_count, Payload, ReplayProvider, ScriptedProvider};
use dyadsim::simulation::{run_event, EventConfig, EventResult, SessionContext};
use dyadsim::types::{
    Attribute, DatingAttributes, ModuleKind, PerAttribute, PerModule, PersonalityProfile, TableKey, Trait, TurnKind,
};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn random_simplex(r: &mut ChaCha8Rng) -> PerModule<f64> {
    let raw = PerModule::from_fn(|_| r.random::<f64>() + 1e-9);
    let z = raw.sum();
    raw.map(|_, v| v / z)
}

fn random_profile(r: &mut ChaCha8Rng) -> PersonalityProfile {
    PersonalityProfile::new(r.random(), r.random(), r.random(), r.random(), r.random())
}

fn responses(conf: PerModule<f64>, payloads: PerModule<&Payload>) -> Vec<ModuleResponse> {
    ModuleKind::ALL
        .iter()
        .map(|m| ModuleResponse::new(*m, format!("{m} view"), payloads[*m].clone(), conf[*m]))
        .collect()
}

fn payload(pairs: &[(&str, f64)]) -> Payload {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn scenario_one_tape() -> Outcome {
    let mut s = AssessmentSession::start("acceptance", ScenarioPool::builtin(), AssessmentConfig::default())
        .map_err(|e| e.to_string())?;
    let provider = ReplayProvider::from_file(&fixture("assessment_scenario1.jsonl")).map_err(|e| e.to_string())?;
    let step = s
        .submit(0, Some("The view from the top, and proving to myself I can get there."), &provider)
        .map_err(|e| e.to_string())?;
    let expected = [
        (Trait::Openness, 63.0, 0.5),
        (Trait::Conscientiousness, 66.0, 0.7),
        (Trait::Extraversion, 39.0, 0.5),
        (Trait::Agreeableness, 50.0, 0.2),
        (Trait::Neuroticism, 37.0, 0.5),
    ];
    for (t, v, c) in expected {
        let got = step.event.post_state[t];
        ensure!(got.value.round() == v, "{t}: value {} rounds to {}, want {v}", got.value, got.value.round());
        ensure!(close(got.confidence, c, 1e-12), "{t}: confidence {} want {c}", got.confidence);
    }
    Ok(())
}

fn integration_arithmetic() -> Outcome {
    let fixtures = [
        ([0.4, 0.3, 0.1, 0.1, 0.1], [0.2, 0.2, 0.2, 0.2, 0.2], [0.3, 0.25, 0.15, 0.15, 0.15]),
        ([0.31, 0.28, 0.21, 0.12, 0.08], [0.1, 0.2, 0.3, 0.25, 0.15], [0.205, 0.24, 0.255, 0.185, 0.115]),
        ([1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0], [0.5, 0.0, 0.0, 0.0, 0.5]),
    ];
    for (sal, pers, want) in fixtures {
        let got = combine_weights(&PerModule(sal), &PerModule(pers));
        for m in ModuleKind::ALL {
            ensure!(close(got[*m], want[m.index()], 1e-12), "{m}: {} want {}", got[*m], want[m.index()]);
        }
    }
    let mut r = rng(11);
    for draw in 0..1000 {
        let sal = random_simplex(&mut r);
        let pers = personality_weights(&random_profile(&mut r), &PersonalityMapping::default());
        let got = combine_weights(&sal, &pers);
        ensure!(close(got.sum(), 1.0, 1e-12), "draw {draw}: sum {}", got.sum());
        for m in ModuleKind::ALL {
            ensure!(got[*m] >= 0.0, "draw {draw}: negative weight for {m}");
            ensure!(close(got[*m], (sal[*m] + pers[*m]) / 2.0, 1e-12), "draw {draw}: {m} off the mean");
        }
    }
    Ok(())
}

fn salience_properties() -> Outcome {
    // Live cycles through the full turn loop.
    let cfg = CognitiveConfig {
        max_iterations: 5,
        epsilon: 1e-9,
        ..CognitiveConfig::default()
    };
    let cog = Cognition::new(Arc::new(ScriptedProvider::seeded(23)), cfg);
    let mut r = rng(23);
    let mut cycles = 0usize;
    let mut turn = 0usize;
    while cycles < 1000 {
        let mut agent = AgentState::new(format!("a{turn}"), "female", random_profile(&mut r));
        let before = agent.workspace.ignition_count;
        let out = cog
            .process_turn(&mut agent, &format!("question number {turn}: what do you enjoy?"), &[])
            .map_err(|e| e.source.to_string())?;
        for t in &out.traces {
            ensure!(close(t.salience_norm.sum(), 1.0, 1e-9), "turn {turn}: salience sums to {}", t.salience_norm.sum());
            let law = if t.conflicts.is_empty() {
                argmax(&t.salience_raw)
            } else {
                argmax(&t.combined_weights)
            };
            ensure!(t.winner == law, "turn {turn} cycle {}: winner {} want {law}", t.iteration, t.winner);
        }
        let last = out.traces.last().ok_or("turn produced no cycles")?;
        ensure!(agent.workspace.broadcast_source == Some(last.winner), "turn {turn}: broadcast source mismatch");
        ensure!(
            agent.workspace.ignition_count == before + out.traces.len() as u64,
            "turn {turn}: ignition count did not follow cycles"
        );
        cycles += out.traces.len();
        turn += 1;
    }

    // Ties go to the earliest module in declaration order.
    for _ in 0..1000 {
        let mask: [bool; 5] = std::array::from_fn(|_| r.random_bool(0.5));
        if !mask.iter().any(|b| *b) {
            continue;
        }
        let top = r.random_range(0.5..2.0);
        let values = PerModule::from_fn(|m| if mask[m.index()] { top } else { top - r.random_range(0.01..0.5) });
        let first = ModuleKind::ALL.iter().copied().find(|m| mask[m.index()]).unwrap();
        ensure!(argmax(&values) == first, "tie {mask:?}: got {}", argmax(&values));
    }
    let flat = responses(PerModule::splat(0.6), PerModule::splat(&Payload::new()));
    let even = compute_salience(&flat, &PersonalityProfile::neutral(), &GlobalWorkspace::default(), &SalienceConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(argmax(&even.normalized) == ModuleKind::Emotion, "flat salience should pick Emotion");

    // Raising a module's paired trait never lowers its share.
    let empty = Payload::new();
    for m in ModuleKind::ALL {
        let conf = PerModule::from_fn(|_| r.random::<f64>());
        let mut profile = random_profile(&mut r);
        let mut prev: Option<(f64, f64)> = None;
        for step in 0..=10 {
            profile.set(m.paired_trait(), step as f64 / 10.0);
            let s = compute_salience(&responses(conf, PerModule::splat(&empty)), &profile, &GlobalWorkspace::default(), &SalienceConfig::default())
                .map_err(|e| e.to_string())?;
            ensure!(close(s.normalized.sum(), 1.0, 1e-9), "grid {m}/{step}: sum {}", s.normalized.sum());
            let p = personality_weights(&profile, &PersonalityMapping::default());
            let now = (s.normalized[*m], p[*m]);
            if let Some(before) = prev {
                ensure!(now.0 > before.0 && now.1 > before.1, "grid {m}/{step}: share fell from {before:?} to {now:?}");
            }
            prev = Some(now);
        }
    }
    Ok(())
}

fn conflict_properties() -> Outcome {
    let cfg = ConflictConfig::default();
    let mut r = rng(31);
    for set in 0..500 {
        let payloads: Vec<Payload> = ModuleKind::ALL
            .iter()
            .map(|m| m.canonical_keys().iter().map(|(k, lo, hi)| (k.to_string(), r.random_range(*lo..=*hi))).collect())
            .collect();
        let rs = responses(PerModule::splat(0.5), PerModule::from_fn(|m| &payloads[m.index()]));
        let matrix = detect_conflicts(&rs, &cfg).map_err(|e| e.to_string())?;
        ensure!(matrix.pairs().len() == 10, "set {set}: {} pairs", matrix.pairs().len());
        for a in ModuleKind::ALL {
            ensure!(matrix.get(*a, *a) == 0.0, "set {set}: diagonal {a} = {}", matrix.get(*a, *a));
            for b in ModuleKind::ALL {
                let s = matrix.get(*a, *b);
                ensure!(s == matrix.get(*b, *a), "set {set}: asymmetric {a}/{b}");
                ensure!((0.0..=1.0).contains(&s), "set {set}: score {s} out of range");
            }
        }
    }

    let emotion = payload(&[("valence", -0.5), ("arousal", 0.68)]);
    let memory = payload(&[("retrieval_strength", 0.7)]);
    let planning = payload(&[("plan_feasibility", 0.9)]);
    let social = payload(&[("formality", 0.6)]);
    let goal = payload(&[("goal_alignment", 0.8)]);
    let set = [&emotion, &memory, &planning, &social, &goal];
    let rs = responses(PerModule([0.85, 0.6, 0.7, 0.5, 0.4]), PerModule(set));
    let matrix = detect_conflicts(&rs, &cfg).map_err(|e| e.to_string())?;
    let score = matrix.get(ModuleKind::Emotion, ModuleKind::Planning);
    ensure!(close(score, 0.35, 0.05), "Emotion/Planning scored {score}");
    let weights = PerModule([0.31, 0.21, 0.28, 0.12, 0.08]);
    let adj = adjust_for_conflicts(&weights, &matrix, &cfg);
    ensure!(
        adj.flagged.iter().any(|p| p.a == ModuleKind::Emotion && p.b == ModuleKind::Planning),
        "Emotion/Planning not flagged at {}",
        cfg.threshold
    );
    for m in [ModuleKind::Emotion, ModuleKind::Planning] {
        ensure!(adj.weights[m] < weights[m], "{m} weight did not decrease: {} -> {}", weights[m], adj.weights[m]);
    }
    ensure!(close(adj.weights.sum(), 1.0, 1e-12), "adjusted sum {}", adj.weights.sum());
    ensure!(adj.weights.values().all(|w| *w >= 0.0), "negative adjusted weight");
    Ok(())
}

fn pool() -> Vec<AgentState> {
    (0..8)
        .map(|i| {
            let gender = if i < 4 { "male" } else { "female" };
            let t = 0.2 + 0.08 * i as f64;
            AgentState::new(format!("p{i}"), gender, PersonalityProfile::new(t, 0.5, 1.0 - t, 0.6, 0.4))
        })
        .collect()
}

struct Exports {
    json: String,
    summary: Vec<u8>,
    traces: Vec<u8>,
}

fn scripted_event(batch_size: usize) -> Result<(EventResult, Vec<AgentState>, Exports), String> {
    let mut agents = pool();
    let cog = Cognition::new(Arc::new(ScriptedProvider::seeded(7)), CognitiveConfig::default());
    let cfg = EventConfig {
        batch_size,
        context: SessionContext {
            rounds: 8,
            ..SessionContext::default()
        },
        ..EventConfig::default()
    };
    let result = run_event(&mut agents, &cog, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    result.write_summary_csv(&mut summary).map_err(|e| e.to_string())?;
    let mut traces = Vec::new();
    result.write_traces(&mut traces).map_err(|e| e.to_string())?;
    let json = result.to_json().map_err(|e| e.to_string())?;
    Ok((result, agents, Exports { json, summary, traces }))
}

fn end_to_end(after: &mut Option<Vec<AgentState>>) -> Outcome {
    let (result, agents, first) = scripted_event(1)?;
    ensure!(result.aborted.is_empty(), "{} sessions aborted", result.aborted.len());
    ensure!(result.sessions.len() == 16, "{} session records", result.sessions.len());
    for s in &result.sessions {
        ensure!(s.turns.len() == 4 * 8 - 2, "{}/{}: {} turns", s.agent_i, s.agent_j, s.turns.len());
        ensure!(s.turns[0].speaker == s.agent_i && s.turns[0].kind == TurnKind::Query, "session must open with a query");
        ensure!(s.decisions.len() == 2, "{}/{}: decisions missing", s.agent_i, s.agent_j);
    }
    let ids: Vec<&str> = agents.iter().map(|a| a.id.as_str()).collect();
    for a in &ids {
        for b in &ids {
            let m = result.matches.is_match(a, b);
            ensure!(m == result.matches.is_match(b, a), "match matrix asymmetric at {a}/{b}");
            let session = result
                .sessions
                .iter()
                .find(|s| (s.agent_i == *a && s.agent_j == *b) || (s.agent_i == *b && s.agent_j == *a));
            let want = session.is_some_and(|s| s.decisions[*a] && s.decisions[*b]);
            ensure!(m == want, "M[{a},{b}] = {m}, decisions say {want}");
        }
    }
    for (label, batch) in [("repeat", 1), ("batch 16", 16)] {
        let (_, _, again) = scripted_event(batch)?;
        ensure!(again.json == first.json, "{label}: results.json differs");
        ensure!(again.summary == first.summary, "{label}: summary.csv differs");
        ensure!(again.traces == first.traces, "{label}: traces.jsonl differs");
    }
    *after = Some(agents);
    Ok(())
}

fn preference_legality(after: &Option<Vec<AgentState>>) -> Outcome {
    let agents = after.as_ref().ok_or("needs the scripted event to have run")?;
    for a in agents {
        let sum = a.attributes.importance.sum();
        ensure!(close(sum, 100.0, 1e-6), "{}: importance sums to {sum}", a.id);
        for (attr, v) in a.attributes.self_ratings.iter() {
            ensure!((1.0..=10.0).contains(v), "{}: self rating {attr} = {v}", a.id);
        }
        for (t, v) in a.profile.traits().iter() {
            ensure!((0.0..=1.0).contains(v), "{}: trait {t} = {v}", a.id);
        }
    }
    let attrs = DatingAttributes {
        self_ratings: PerAttribute([7.0, 6.0, 8.0, 5.0, 6.5, 4.0]),
        importance: PerAttribute([25.0, 20.0, 15.0, 15.0, 15.0, 10.0]),
    };
    let profile = PersonalityProfile::new(0.6, 0.4, 0.7, 0.5, 0.3);
    let (next, next_profile) = update_preferences(&attrs, &profile, &PerAttribute([9.0, 2.0, 6.0, 8.0, 3.0, 7.0]), 0.5, 0.3)
        .map_err(|e| e.to_string())?;
    ensure!(next == attrs, "success 0.5 changed attributes");
    ensure!(next_profile == profile, "success 0.5 changed traits");
    Ok(())
}

fn oracle_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn snapshot(id: usize, time: TimeLabel, importance: PerAttribute<f64>) -> SnapshotRow {
    SnapshotRow {
        agent_id: format!("a{id}"),
        time,
        importance,
        self_ratings: PerAttribute::splat(5.0),
        received_ratings: None,
        overall_liking: None,
    }
}

fn metrics_oracles() -> Outcome {
    let mut r = rng(47);
    for i in 0..500 {
        let n = r.random_range(3..40);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let got = pearson(&xs, &ys).map_err(|e| e.to_string())?;
        ensure!(close(got, oracle_pearson(&xs, &ys), 1e-12), "instance {i}: pearson {got}");

        let k = r.random_range(1..20);
        let t1: Vec<PerAttribute<f64>> = (0..k).map(|_| PerAttribute::from_fn(|_| r.random_range(1.0..40.0))).collect();
        let t2: Vec<PerAttribute<f64>> = (0..k).map(|_| PerAttribute::from_fn(|_| r.random_range(1.0..40.0))).collect();
        let mut rows: Vec<SnapshotRow> = t1.iter().enumerate().map(|(j, v)| snapshot(j, TimeLabel::T1, *v)).collect();
        rows.extend(t2.iter().enumerate().map(|(j, v)| snapshot(j, TimeLabel::T2, *v)));
        let table = SnapshotTable::new(rows).map_err(|e| e.to_string())?;
        let got = percent_change(&table, Field::Importance, ChangeMode::Population).map_err(|e| e.to_string())?;
        for a in Attribute::ALL {
            let m1: f64 = t1.iter().map(|v| v[*a]).sum::<f64>() / k as f64;
            let m2: f64 = t2.iter().map(|v| v[*a]).sum::<f64>() / k as f64;
            let want = 100.0 * (m2 - m1) / m1;
            ensure!(close(got[*a], want, 1e-12), "instance {i}: {a} change {} want {want}", got[*a]);
        }

        let len = r.random_range(1..60);
        let p: Vec<bool> = (0..len).map(|_| r.random_bool(0.5)).collect();
        let q: Vec<bool> = (0..len).map(|_| r.random_bool(0.5)).collect();
        let agree = p.iter().zip(&q).filter(|(x, y)| x == y).count();
        let got = match_accuracy(&p, &q).map_err(|e| e.to_string())?;
        ensure!(close(got, 100.0 * agree as f64 / len as f64, 1e-12), "instance {i}: accuracy {got}");
    }
    let predicted = [true, true, false, false, true, false, true, false, true];
    let actual = [true, true, false, false, true, false, true, true, false];
    let shown = format_percent(match_accuracy(&predicted, &actual).map_err(|e| e.to_string())?);
    ensure!(shown == "77.8%", "7 of 9 printed as {shown}");
    let rows = vec![
        snapshot(0, TimeLabel::T1, PerAttribute::splat(20.0)),
        snapshot(0, TimeLabel::T2, PerAttribute::splat(27.8)),
    ];
    let table = SnapshotTable::new(rows).map_err(|e| e.to_string())?;
    let change = percent_change(&table, Field::Importance, ChangeMode::Population).map_err(|e| e.to_string())?;
    let shown = format_change(change[Attribute::Attractiveness]);
    ensure!(shown == "+39.0%", "20 -> 27.8 printed as {shown}");
    Ok(())
}

fn ingest_validation() -> Outcome {
    let mapping = ColumnMapping::default();
    let bad = parse_csv(&fixture("bad_importance.csv"), &mapping).map_err(|e| e.to_string())?;
    ensure!(bad.rejections.len() == 1, "{} rejections", bad.rejections.len());
    let rej = &bad.rejections[0];
    ensure!(rej.row == 3 && rej.reason == "importance sum 90 ≠ 100", "rejection was row {}: {}", rej.row, rej.reason);
    let good = parse_csv(&fixture("participants_valid.csv"), &mapping).map_err(|e| e.to_string())?;
    ensure!(good.records.len() == 6 && good.rejections.is_empty(), "valid fixture did not parse cleanly");
    let mut first = Vec::new();
    export_csv(&good.records, &mapping, &mut first).map_err(|e| e.to_string())?;
    let back = parse_reader(first.as_slice(), &mapping).map_err(|e| e.to_string())?;
    ensure!(back.rejections.is_empty() && back.records == good.records, "records changed across round-trip");
    let mut second = Vec::new();
    export_csv(&back.records, &mapping, &mut second).map_err(|e| e.to_string())?;
    ensure!(first == second, "exported bytes changed across round-trip");
    Ok(())
}

fn offline() -> Outcome {
    let n = outbound_request_count();
    ensure!(n == 0, "{n} outbound requests were made");
    Ok(())
}

fn run(name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    });
    let elapsed = start.elapsed();
    let timed = elapsed < budget;
    let ok = outcome.is_ok() && timed;
    let status = if ok { "PASS" } else { "FAIL" };
    print!("{status} {name} ({:.3}s, budget {}s)", elapsed.as_secs_f64(), budget.as_secs());
    match outcome {
        Err(e) => println!(": {e}"),
        Ok(()) if !timed => println!(": over budget"),
        Ok(()) => println!(),
    }
    ok
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut after_event = None;
    let results = [
        run("scenario-1 assessment arithmetic", secs(1), scenario_one_tape),
        run("integration arithmetic", secs(1), integration_arithmetic),
        run("salience properties", secs(5), salience_properties),
        run("conflict properties", secs(5), conflict_properties),
        run("end-to-end scripted event", secs(10), || end_to_end(&mut after_event)),
        run("preference legality", secs(2), || preference_legality(&after_event)),
        run("metrics oracle equivalence", secs(5), metrics_oracles),
        run("ingest validation", secs(1), ingest_validation),
        run("offline run", secs(1), offline),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
