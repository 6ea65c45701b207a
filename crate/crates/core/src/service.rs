//! JSON HTTP API under `/v1/`.
//!
//! The service is stateless: every request reads the shared, immutable
//! pipeline. Until the pipeline has finished loading, endpoints that need it
//! answer 503.

use std::sync::{Arc, OnceLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::{ConfigError, ServiceConfig};
use crate::knowledge_base::{lookup_answer, sample_faqs, FaqId, FaqLanguage};
use crate::language::LanguageTag;
use crate::pipeline::{AnswerSource, ChatResponse, Pipeline, PipelineError};

pub const API_SCHEMA_VERSION: u32 = 1;
pub const ANSWER_SOURCE_HEADER: &str = "x-answer-source";
const DEFAULT_SAMPLE_SIZE: usize = 3;

struct Inner {
    pipeline: OnceLock<Pipeline>,
    sample_seed: Option<u64>,
    max_query_chars: usize,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// A state with no pipeline yet; see [`AppState::set_pipeline`].
    pub fn loading(sample_seed: Option<u64>, max_query_chars: usize) -> Self {
        AppState {
            inner: Arc::new(Inner {
                pipeline: OnceLock::new(),
                sample_seed,
                max_query_chars,
            }),
        }
    }

    pub fn ready(pipeline: Pipeline, sample_seed: Option<u64>, max_query_chars: usize) -> Self {
        let state = Self::loading(sample_seed, max_query_chars);
        state.set_pipeline(pipeline);
        state
    }

    /// Installs the pipeline. Later calls are ignored.
    pub fn set_pipeline(&self, pipeline: Pipeline) {
        let _ = self.inner.pipeline.set(pipeline);
    }

    fn pipeline(&self) -> Result<&Pipeline, ApiError> {
        self.inner.pipeline.get().ok_or(ApiError::NotReady)
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest { code: &'static str, message: String },
    NotFound(String),
    Provider(PipelineError),
    Internal(String),
    NotReady,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message, stage) = match self {
            ApiError::BadRequest { code, message } => (StatusCode::BAD_REQUEST, code, message, None),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "unknown_id", m, None),
            ApiError::Provider(e) => (StatusCode::BAD_GATEWAY, "provider_error", e.to_string(), e.stage()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m, None),
            ApiError::NotReady => (StatusCode::SERVICE_UNAVAILABLE, "not_ready", "the pipeline is still loading".into(), None),
        };
        let body = json!({
            "schema_version": API_SCHEMA_VERSION,
            "error": {"code": code, "message": message, "stage": stage},
        });
        (status, Json(body)).into_response()
    }
}

fn bad_request(code: &'static str, message: impl Into<String>) -> ApiError {
    ApiError::BadRequest {
        code,
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    n: Option<usize>,
}

#[derive(Debug, Serialize)]
struct FaqSummary<'a> {
    id: &'a FaqId,
    question: &'a str,
    language: FaqLanguage,
}

async fn faq_sample(
    State(state): State<AppState>,
    params: Result<Query<SampleParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(params) = params.map_err(|e| bad_request("invalid_query", e.body_text()))?;
    let pipeline = state.pipeline()?;
    let corpus = pipeline.corpus();
    let n = params.n.unwrap_or(DEFAULT_SAMPLE_SIZE);
    if n == 0 || n > corpus.len() {
        return Err(bad_request("n_out_of_range", format!("n must be between 1 and {}", corpus.len())));
    }
    let seed = state.inner.sample_seed.unwrap_or_else(rand::random);
    let faqs = sample_faqs(corpus, n, seed).map_err(|e| bad_request("n_out_of_range", e.to_string()))?;
    let items: Vec<_> = faqs
        .iter()
        .map(|e| FaqSummary {
            id: &e.id,
            question: &e.question,
            language: e.language,
        })
        .collect();
    Ok(Json(json!({"schema_version": API_SCHEMA_VERSION, "faqs": items})).into_response())
}

async fn faq_answer(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let pipeline = state.pipeline()?;
    let id = FaqId::new(id);
    let answer = lookup_answer(pipeline.corpus(), &id).map_err(|e| ApiError::NotFound(e.to_string()))?;
    let mut resp = Json(json!({"schema_version": API_SCHEMA_VERSION, "id": id, "answer": answer})).into_response();
    resp.headers_mut()
        .insert(ANSWER_SOURCE_HEADER, HeaderValue::from_static("cache"));
    Ok(resp)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    pub query: String,
}

/// The part of a [`ChatResponse`] the UI needs.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatReply {
    pub schema_version: u32,
    pub answer: String,
    pub source: AnswerSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_faq_id: Option<FaqId>,
    pub context_ids: Vec<FaqId>,
    pub detected_language: LanguageTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub translated_query: Option<String>,
}

impl From<ChatResponse> for ChatReply {
    fn from(r: ChatResponse) -> Self {
        ChatReply {
            schema_version: API_SCHEMA_VERSION,
            answer: r.answer,
            source: r.source,
            matched_faq_id: r.matched_faq_id,
            context_ids: r.context_ids,
            detected_language: r.detected_language,
            translated_query: r.translated_query,
        }
    }
}

async fn chat(State(state): State<AppState>, body: Result<Json<ChatRequest>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| bad_request("invalid_body", e.body_text()))?;
    if req.query.trim().is_empty() {
        return Err(bad_request("empty_query", "query is empty"));
    }
    let max = state.inner.max_query_chars;
    let chars = req.query.chars().count();
    if chars > max {
        return Err(bad_request("query_too_long", format!("query has {chars} characters; the limit is {max}")));
    }
    state.pipeline()?;
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let pipeline = worker.pipeline().expect("checked above");
        pipeline.answer_query(&req.query)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    match result {
        Ok(resp) => {
            tracing::info!(
                source = ?resp.source,
                language = resp.detected_language.code(),
                timings = ?resp.timings,
                calls = ?resp.provider_calls,
                "chat answered"
            );
            Ok(Json(ChatReply::from(resp)).into_response())
        }
        Err(PipelineError::EmptyQuery) => Err(bad_request("empty_query", "query is empty")),
        Err(e) => {
            tracing::warn!(error = %e, stage = ?e.stage(), "chat failed");
            Err(ApiError::Provider(e))
        }
    }
}

async fn health(State(state): State<AppState>) -> Response {
    let ready = state.inner.pipeline.get().is_some();
    let status = if ready { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    let body = json!({"schema_version": API_SCHEMA_VERSION, "status": if ready { "ok" } else { "loading" }});
    (status, Json(body)).into_response()
}

pub fn router(state: AppState, cors_origins: &[String]) -> Router {
    let mut app = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/faqs/sample", get(faq_sample))
        .route("/v1/faqs/{id}/answer", get(faq_answer))
        .route("/v1/chat", post(chat))
        .with_state(state);
    let origins: Vec<HeaderValue> = cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
    if !origins.is_empty() {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE])
                .expose_headers([axum::http::HeaderName::from_static(ANSWER_SOURCE_HEADER)]),
        );
    }
    app
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binds, then loads the pipeline in the background and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    config.validate()?;
    let providers = config.providers.build()?;
    let state = AppState::loading(config.faq_sample_seed, config.max_query_chars);
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let app = router(state.clone(), &config.cors_origins);
    let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<ConfigError>();
    tokio::task::spawn_blocking(move || match config.build_pipeline_with(providers) {
        Ok(pipeline) => {
            state.set_pipeline(pipeline);
            tracing::info!("pipeline ready");
        }
        Err(e) => {
            let _ = fail_tx.send(e);
        }
    });
    let failure = Arc::new(std::sync::Mutex::new(None));
    let slot = failure.clone();
    let shutdown = async move {
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            res = fail_rx => match res {
                Ok(e) => {
                    tracing::error!(error = %e, "pipeline failed to load");
                    *slot.lock().expect("failure slot") = Some(e);
                }
                // Loaded fine; the sender is gone.
                Err(_) => {
                    let _ = tokio::signal::ctrl_c().await;
                }
            },
        }
    };
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    let failed = failure.lock().expect("failure slot").take();
    match failed {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
