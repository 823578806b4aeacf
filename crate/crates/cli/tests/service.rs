use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dyadsim::assessment::ScenarioPool;
use dyadsim::config::{ProviderSelection, RunConfig};
use dyadsim::dataset::{parse_csv, ColumnMapping};
use dyadsim::provider::{
    Generation, GenerationRequest, ProviderError, RemoteConfig, RemoteProvider, ScriptedProvider, TextProvider,
};
use dyadsim_cli::service::{router, AppState, ProviderFactory};

/// Scripted provider that blocks every call until opened.
struct Gated {
    inner: ScriptedProvider,
    open: Mutex<bool>,
    cv: Condvar,
}

impl Gated {
    fn release(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }

    fn wait(&self) {
        let mut g = self.open.lock().unwrap();
        while !*g {
            g = self.cv.wait(g).unwrap();
        }
    }
}

impl TextProvider for Gated {
    fn name(&self) -> &str {
        "gated"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        self.wait();
        self.inner.generate(request)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.wait();
        self.inner.embed(text)
    }
}

fn app_with(provider: Arc<dyn TextProvider>, factory: ProviderFactory) -> Router {
    router(Arc::new(AppState::with_provider(
        RunConfig::scripted(3),
        provider,
        factory,
        ScenarioPool::builtin(),
        None,
    )))
}

fn app() -> Router {
    let state = AppState::new(RunConfig::scripted(3), ScenarioPool::builtin(), None).unwrap();
    router(Arc::new(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

#[tokio::test]
async fn health() {
    let (s, v) = call(&app(), "GET", "/healthz", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn assessment_walkthrough() {
    let app = app();
    let (s, created) = call(&app, "POST", "/assessments", None).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["scenario"]["id"], "s01");
    let choice = format!("/assessments/{id}/choice");

    let (s, _) = call(&app, "POST", &choice, Some(json!({ "option_index": 9 }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", &choice, Some(json!({ "option_index": -1 }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let mut last = Value::Null;
    for n in 0..12 {
        let (s, v) = call(
            &app,
            "POST",
            &choice,
            Some(json!({ "option_index": n % 4, "free_text": "I would go with my gut.", "expected_seq": n })),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["seq"], n + 1);
        assert_eq!(v["done"], n == 11);
        last = v;
    }
    assert!(last["next"].is_null());
    let (s, _) = call(&app, "POST", &choice, Some(json!({ "option_index": 0 }))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, profile) = call(&app, "GET", &format!("/assessments/{id}/profile"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(profile["done"], true);
    assert_eq!(profile["scenarios_seen"], 12);
    assert_eq!(profile["profile"], last["profile"]);
    let open = profile["final"]["profile"]["openness"].as_f64().unwrap();
    let shown = profile["profile"]["openness"]["value"].as_f64().unwrap();
    assert!((open - shown / 100.0).abs() < 1e-12);

    let (s, _) = call(&app, "GET", "/assessments/a-999/profile", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/assessments/a-999/choice", Some(json!({ "option_index": 0 }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn duplicate_submission_is_refused() {
    let app = app();
    let (_, created) = call(&app, "POST", "/assessments", None).await;
    let choice = format!("/assessments/{}/choice", created["session_id"].as_str().unwrap());
    let body = json!({ "option_index": 1, "expected_seq": 0 });
    let (first, _) = call(&app, "POST", &choice, Some(body.clone())).await;
    let (second, _) = call(&app, "POST", &choice, Some(body)).await;
    assert_eq!((first, second), (StatusCode::OK, StatusCode::CONFLICT));
}

#[tokio::test]
async fn unavailable_provider_gives_503() {
    let remote = RemoteProvider::new(RemoteConfig {
        token_env: "DYADSIM_TEST_TOKEN_THAT_IS_NEVER_SET".into(),
        ..RemoteConfig::default()
    });
    let app = app_with(Arc::new(remote), Arc::new(|c: &RunConfig| c.build_provider()));
    let (s, _) = call(&app, "POST", "/assessments", None).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(dyadsim::provider::outbound_request_count(), 0);
}

fn participants() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/pool8.csv");
    serde_json::to_value(parse_csv(&path, &ColumnMapping::default()).unwrap().records).unwrap()
}

#[tokio::test]
async fn simulation_lifecycle() {
    let gate = Arc::new(Gated {
        inner: ScriptedProvider::seeded(3),
        open: Mutex::new(false),
        cv: Condvar::new(),
    });
    let g = gate.clone();
    let app = app_with(gate.clone(), Arc::new(move |_: &RunConfig| Ok(g.clone() as Arc<dyn TextProvider>)));
    let mut cfg = RunConfig::scripted(3);
    cfg.rounds = Some(1);

    let (s, v) = call(&app, "POST", "/simulations", Some(json!({ "config": cfg, "participants": participants() }))).await;
    assert_eq!(s, StatusCode::ACCEPTED, "{v}");
    let id = v["run_id"].as_str().unwrap().to_string();

    let (s, status) = call(&app, "GET", &format!("/simulations/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(matches!(status["status"].as_str(), Some("queued" | "running")));
    let (s, _) = call(&app, "GET", &format!("/simulations/{id}/results"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, "GET", &format!("/simulations/{id}/traces"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    gate.release();
    let mut done = false;
    for _ in 0..600 {
        let (_, st) = call(&app, "GET", &format!("/simulations/{id}"), None).await;
        if st["status"] == "done" {
            assert_eq!(st["progress"], 1.0);
            done = true;
            break;
        }
        assert_ne!(st["status"], "failed", "{st}");
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    assert!(done);
    let (s, results) = call(&app, "GET", &format!("/simulations/{id}/results"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(results["sessions"].as_array().unwrap().len(), 16);
    let (s, traces) = call(&app, "GET", &format!("/simulations/{id}/traces"), None).await;
    assert_eq!(s, StatusCode::OK);
    let first = traces.as_str().unwrap().lines().next().unwrap();
    assert!(serde_json::from_str::<Value>(first).unwrap()["salience_norm"].is_object());
}

#[tokio::test]
async fn invalid_simulation_requests_give_422() {
    let app = app();
    let mut cfg = RunConfig::scripted(1);
    cfg.threshold = 3.0;
    let (s, _) = call(&app, "POST", "/simulations", Some(json!({ "config": cfg, "participants": participants() }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let mut unseeded = RunConfig::default();
    unseeded.provider = ProviderSelection::Scripted { script: None, strict: false };
    let (s, _) = call(&app, "POST", "/simulations", Some(json!({ "config": unseeded, "participants": [] }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/simulations", Some(json!({}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "GET", "/simulations/run-404", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
