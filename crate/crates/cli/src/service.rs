//! HTTP API over assessments and simulation runs.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use dyadsim::assessment::{AssessmentError, AssessmentSession, FinalProfile, Scenario, ScenarioPool, TraitEstimate};
use dyadsim::config::{ConfigError, RunConfig};
use dyadsim::dataset::ParticipantRecord;
use dyadsim::provider::TextProvider;
use dyadsim::simulation::EventResult;
use dyadsim::types::PerTrait;

use crate::run;

pub type ProviderFactory = Arc<dyn Fn(&RunConfig) -> Result<Arc<dyn TextProvider>, ConfigError> + Send + Sync>;

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn new(status: StatusCode, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<AssessmentError> for ApiError {
    fn from(e: AssessmentError) -> Self {
        let status = match e {
            AssessmentError::InvalidOption { .. } | AssessmentError::EmptyText => StatusCode::UNPROCESSABLE_ENTITY,
            AssessmentError::Finished | AssessmentError::NotFinished => StatusCode::CONFLICT,
            AssessmentError::Provider(_) => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(status, e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug)]
struct RunEntry {
    status: RunStatus,
    progress: f64,
    result: Option<Arc<EventResult>>,
    error: Option<String>,
}

pub struct AppState {
    config: RunConfig,
    provider: Arc<dyn TextProvider>,
    factory: ProviderFactory,
    pool: ScenarioPool,
    out_dir: Option<PathBuf>,
    assessments: Mutex<HashMap<String, Arc<Mutex<AssessmentSession>>>>,
    runs: Mutex<HashMap<String, Arc<Mutex<RunEntry>>>>,
    ids: AtomicU64,
}

impl AppState {
    /// Assessments use `config`'s provider; each simulation builds its own
    /// from the submitted config.
    pub fn new(config: RunConfig, pool: ScenarioPool, out_dir: Option<PathBuf>) -> Result<Self, ConfigError> {
        let provider = config.build_provider()?;
        Ok(Self::with_provider(config, provider, Arc::new(|c: &RunConfig| c.build_provider()), pool, out_dir))
    }

    pub fn with_provider(
        config: RunConfig,
        provider: Arc<dyn TextProvider>,
        factory: ProviderFactory,
        pool: ScenarioPool,
        out_dir: Option<PathBuf>,
    ) -> Self {
        Self {
            config,
            provider,
            factory,
            pool,
            out_dir,
            assessments: Mutex::new(HashMap::new()),
            runs: Mutex::new(HashMap::new()),
            ids: AtomicU64::new(1),
        }
    }

    fn next_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.ids.fetch_add(1, Ordering::Relaxed))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<AssessmentSession>>, ApiError> {
        self.assessments
            .lock()
            .expect("assessment table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no assessment {id}")))
    }

    fn run(&self, id: &str) -> Result<Arc<Mutex<RunEntry>>, ApiError> {
        self.runs
            .lock()
            .expect("run table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no simulation {id}")))
    }

    fn log_event(&self, session: &str, event: &dyadsim::assessment::AssessmentEvent) {
        let Some(dir) = &self.out_dir else { return };
        let dir = dir.join("assessments");
        let written = std::fs::create_dir_all(&dir).and_then(|_| {
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(format!("{session}.jsonl")))?;
            writeln!(f, "{}", serde_json::to_string(event).map_err(std::io::Error::other)?)
        });
        if let Err(e) = written {
            tracing::warn!(session, error = %e, "could not persist assessment event");
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/assessments", post(create_assessment))
        .route("/assessments/{id}/choice", post(submit_choice))
        .route("/assessments/{id}/profile", get(assessment_profile))
        .route("/simulations", post(create_simulation))
        .route("/simulations/{id}", get(simulation_status))
        .route("/simulations/{id}/results", get(simulation_results))
        .route("/simulations/{id}/traces", get(simulation_traces))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).await
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Serialize)]
struct Created {
    session_id: String,
    scenario: Option<Scenario>,
}

async fn create_assessment(State(state): State<Arc<AppState>>) -> Result<(StatusCode, Json<Created>), ApiError> {
    if !state.provider.is_available() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("provider {} is unavailable", state.provider.name())));
    }
    let id = state.next_id("a");
    let session = AssessmentSession::start(&id, state.pool.clone(), state.config.assessment)?;
    let scenario = session.current_scenario().cloned();
    state
        .assessments
        .lock()
        .expect("assessment table poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(Created { session_id: id, scenario })))
}

#[derive(Debug, Deserialize)]
struct ChoiceBody {
    option_index: usize,
    #[serde(default)]
    free_text: Option<String>,
    /// Number of events the client has seen; a stale value means a
    /// duplicate submission and is refused.
    #[serde(default)]
    expected_seq: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ChoiceReply {
    session_id: String,
    seq: usize,
    profile: PerTrait<TraitEstimate>,
    next: Option<Scenario>,
    done: bool,
    low_confidence: bool,
}

async fn submit_choice(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ChoiceBody>,
) -> Result<Json<ChoiceReply>, ApiError> {
    let session = state.session(&id)?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut s = session.lock().expect("session poisoned");
        if s.is_done() {
            return Err(ApiError::from(AssessmentError::Finished));
        }
        if let Some(seq) = body.expected_seq {
            if seq != s.events().len() {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    format!("stale submission: expected_seq {seq}, session is at {}", s.events().len()),
                ));
            }
        }
        let step = s.submit(body.option_index, body.free_text.as_deref(), st.provider.as_ref())?;
        st.log_event(&id, &step.event);
        Ok(Json(ChoiceReply {
            session_id: id,
            seq: s.events().len(),
            profile: s.display_profile(),
            next: step.next,
            done: step.done,
            low_confidence: step.low_confidence,
        }))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Debug, Serialize)]
struct ProfileReply {
    session_id: String,
    profile: PerTrait<TraitEstimate>,
    scenarios_seen: usize,
    done: bool,
    low_confidence: bool,
    #[serde(rename = "final")]
    final_profile: Option<FinalProfile>,
}

async fn assessment_profile(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ProfileReply>, ApiError> {
    let session = state.session(&id)?;
    let s = session.lock().expect("session poisoned");
    Ok(Json(ProfileReply {
        session_id: id,
        profile: s.display_profile(),
        scenarios_seen: s.state().scenarios_seen,
        done: s.is_done(),
        low_confidence: s.low_confidence(),
        final_profile: if s.is_done() { Some(s.finalize()?) } else { None },
    }))
}

#[derive(Debug, Deserialize)]
struct SimulationBody {
    #[serde(default)]
    config: Option<RunConfig>,
    #[serde(default)]
    participants: Option<Vec<ParticipantRecord>>,
    #[serde(default)]
    participants_csv: Option<PathBuf>,
    #[serde(default)]
    mapping: Option<PathBuf>,
}

async fn create_simulation(
    State(state): State<Arc<AppState>>,
    Json(body): Json<SimulationBody>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let unprocessable = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m);
    let config = body.config.unwrap_or_else(|| state.config.clone());
    config.validate().map_err(|e| unprocessable(e.to_string()))?;
    let records = match (body.participants, body.participants_csv) {
        (Some(p), None) => p,
        (None, Some(path)) => {
            let mapping = run::load_mapping(body.mapping.as_deref()).map_err(|e| unprocessable(e.to_string()))?;
            let report = run::ingest(&path, &mapping).map_err(|e| unprocessable(e.to_string()))?;
            if !report.rejections.is_empty() {
                return Err(unprocessable(format!("{} rejected rows in {}", report.rejections.len(), path.display())));
            }
            report.records
        }
        _ => return Err(unprocessable("give exactly one of participants or participants_csv".into())),
    };
    let provider = (state.factory)(&config).map_err(|e| unprocessable(e.to_string()))?;
    let id = state.next_id("run");
    let entry = Arc::new(Mutex::new(RunEntry {
        status: RunStatus::Queued,
        progress: 0.0,
        result: None,
        error: None,
    }));
    state.runs.lock().expect("run table poisoned").insert(id.clone(), entry.clone());
    let out_dir = state.out_dir.clone().map(|d| d.join("runs").join(&id));
    tokio::task::spawn_blocking(move || {
        entry.lock().expect("run poisoned").status = RunStatus::Running;
        let mut agents = run::agents_from(&records, &config);
        let outcome = config
            .event_config()
            .map_err(|e| e.to_string())
            .and_then(|event| {
                let cognition = dyadsim::cognitive::Cognition::new(provider, config.cognitive.clone());
                dyadsim::simulation::run_event(&mut agents, &cognition, &event, |p| {
                    entry.lock().expect("run poisoned").progress = p.fraction();
                })
                .map_err(|e| e.to_string())
            })
            .and_then(|result| {
                if let Some(dir) = &out_dir {
                    run::write_exports(&result, dir).map_err(|e| format!("{e:#}"))?;
                }
                Ok(result)
            });
        let mut e = entry.lock().expect("run poisoned");
        match outcome {
            Ok(result) => {
                e.status = RunStatus::Done;
                e.progress = 1.0;
                e.result = Some(Arc::new(result));
            }
            Err(msg) => {
                tracing::error!(error = %msg, "simulation failed");
                e.status = RunStatus::Failed;
                e.error = Some(msg);
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": id }))))
}

async fn simulation_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let entry = state.run(&id)?;
    let e = entry.lock().expect("run poisoned");
    Ok(Json(json!({
        "run_id": id,
        "status": e.status,
        "progress": e.progress,
        "error": e.error,
    })))
}

fn finished(state: &AppState, id: &str) -> Result<Arc<EventResult>, ApiError> {
    let entry = state.run(id)?;
    let e = entry.lock().expect("run poisoned");
    match (&e.status, &e.result) {
        (RunStatus::Done, Some(r)) => Ok(r.clone()),
        (status, _) => Err(ApiError::new(StatusCode::CONFLICT, format!("simulation {id} is {status:?}, not done"))),
    }
}

async fn simulation_results(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let result = finished(&state, &id)?;
    let body = result
        .to_json()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body).into_response())
}

async fn simulation_traces(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let result = finished(&state, &id)?;
    let mut body = Vec::new();
    result
        .write_traces(&mut body)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
