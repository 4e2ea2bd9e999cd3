#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qaexplain_core::bench::{load_dataset, run_components, train_stage_models};
use qaexplain_core::components::{parse_synonyms, Components};
use qaexplain_core::explain::TemplateRepository;
use qaexplain_core::kg::{Graph, PrefixTable};
use qaexplain_core::outcome::{ClassifierKind, TrainOptions};
use qaexplain_core::pipeline::PipelineConfig;
use qaexplain_service::survey::default_questions;
use qaexplain_service::{router, AppState, FeedbackLog};
use serde_json::Value;
use tower::ServiceExt;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Logistic-regression pipeline over the desk graph, trained once.
pub fn desk_config() -> &'static PipelineConfig {
    static CONFIG: OnceLock<PipelineConfig> = OnceLock::new();
    CONFIG.get_or_init(|| {
        let graph = Graph::load_ntriples(&read("desk_kg.nt")).unwrap();
        let components = Components::standard(parse_synonyms(&read("relation_synonyms.tsv")).unwrap());
        let data = load_dataset(&fixture("desk_dataset.json"), &graph, &PrefixTable::well_known()).unwrap();
        let runs = run_components(&data.records, &graph, &components);
        let models =
            train_stage_models(&data.records, &runs, ClassifierKind::LogisticRegression, TrainOptions::default())
                .unwrap();
        PipelineConfig {
            graph: Arc::new(graph),
            components: Arc::new(components),
            models,
            templates: Arc::new(TemplateRepository::shipped()),
            prefixes: PrefixTable::well_known(),
        }
    })
}

pub fn app_with(pipeline: Option<PipelineConfig>, log: &Path) -> (Router, AppState) {
    let state = AppState::new(
        pipeline,
        Arc::new(TemplateRepository::shipped()),
        default_questions(),
        FeedbackLog::open(log).unwrap(),
    );
    (router(state.clone(), None), state)
}

pub fn app(log: &Path) -> Router {
    app_with(Some(desk_config().clone()), log).0
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn post(app: &Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    send(app, "POST", uri, Some(&body.to_string())).await
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, "GET", uri, None).await
}

pub fn rating(session: &str, question: &str, mode: &str, r: [u8; 4]) -> Value {
    serde_json::json!({
        "session_id": session,
        "question_id": question,
        "mode": mode,
        "ratings": {
            "justification": r[0],
            "education": r[1],
            "involvement": r[2],
            "acceptance": r[3],
        },
    })
}
