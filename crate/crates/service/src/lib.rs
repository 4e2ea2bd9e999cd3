//! HTTP API over the explainable QA pipeline, plus survey feedback capture.
//!
//! | Method | Path                  | Body / result                                  |
//! |--------|-----------------------|------------------------------------------------|
//! | POST   | `/api/ask`            | `{question, explain}` → pipeline trace         |
//! | POST   | `/api/feedback`       | feedback record → `{id}`                       |
//! | GET    | `/api/survey/summary` | rating histograms per dimension and mode       |
//! | GET    | `/api/templates`      | `{count, templates}`                           |
//! | GET    | `/api/questions`      | the survey question set                        |
//! | GET    | `/api/health`         | `{status, pipeline_loaded}`                    |
//!
//! Errors are `{"error": message}` with status 400, 503 or 500.

pub mod feedback;
pub mod survey;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qaexplain_core::explain::{ExplanationTemplate, TemplateRepository};
use qaexplain_core::pipeline::{PipelineConfig, PipelineTrace};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tower_http::services::ServeDir;

pub use feedback::{Dimension, FeedbackLog, FeedbackRecord, Mode, RatingSummary, StoredFeedback, SurveySummary};
pub use survey::{Expected, SurveyQuestion};

/// Longest accepted question, in characters.
pub const MAX_QUESTION_CHARS: usize = 1000;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {message}", path.display())]
    CorruptLog { path: PathBuf, line: usize, message: String },
    #[error("survey questions: {0}")]
    Questions(String),
}

struct Inner {
    pipeline: Option<PipelineConfig>,
    templates: Arc<TemplateRepository>,
    questions: Vec<SurveyQuestion>,
    feedback: FeedbackLog,
}

/// Shared, read-only state apart from the feedback log.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Without a pipeline, `/api/ask` answers 503 and the rest still works.
    pub fn new(
        pipeline: Option<PipelineConfig>,
        templates: Arc<TemplateRepository>,
        questions: Vec<SurveyQuestion>,
        feedback: FeedbackLog,
    ) -> Self {
        AppState(Arc::new(Inner { pipeline, templates, questions, feedback }))
    }

    pub fn feedback(&self) -> &FeedbackLog {
        &self.0.feedback
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AskRequest {
    question: String,
    #[serde(default = "yes")]
    explain: bool,
}

fn yes() -> bool {
    true
}

async fn ask(State(state): State<AppState>, body: Bytes) -> Result<Json<PipelineTrace>, ApiError> {
    let req: AskRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if req.question.trim().is_empty() {
        return Err(ApiError::bad_request("question is empty"));
    }
    let chars = req.question.chars().count();
    if chars > MAX_QUESTION_CHARS {
        return Err(ApiError::bad_request(format!(
            "question has {chars} characters; the limit is {MAX_QUESTION_CHARS}"
        )));
    }
    if state.0.pipeline.is_none() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "pipeline configuration is not loaded"));
    }
    let trace = tokio::task::spawn_blocking(move || {
        let config = state.0.pipeline.as_ref().expect("checked above");
        config.answer_question(&req.question)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut trace = trace;
    if !req.explain {
        trace.strip_explanations();
    }
    Ok(Json(trace))
}

async fn post_feedback(State(state): State<AppState>, body: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let record = feedback::parse_feedback(&body, feedback::now_rfc3339).map_err(ApiError::bad_request)?;
    let stored = tokio::task::spawn_blocking(move || state.0.feedback.append(record))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(json!({ "id": stored.id })))
}

async fn summary(State(state): State<AppState>) -> Json<SurveySummary> {
    Json(state.0.feedback.summary())
}

#[derive(Serialize)]
struct TemplateListing<'a> {
    count: usize,
    templates: &'a [ExplanationTemplate],
}

async fn templates(State(state): State<AppState>) -> Response {
    let repo = &state.0.templates;
    Json(TemplateListing { count: repo.len(), templates: repo.templates() }).into_response()
}

async fn questions(State(state): State<AppState>) -> Response {
    Json(&state.0.questions).into_response()
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "pipeline_loaded": state.0.pipeline.is_some() }))
}

/// The API routes, with `static_dir` (if any) served for every other path.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/ask", post(ask))
        .route("/api/feedback", post(post_feedback))
        .route("/api/survey/summary", get(summary))
        .route("/api/templates", get(templates))
        .route("/api/questions", get(questions))
        .route("/api/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}

/// Serves on an already bound listener until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
