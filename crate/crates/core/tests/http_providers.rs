//! HTTP providers against a local server that wraps the mock providers.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use faqrag::knowledge_base::FaqCorpus;
use faqrag::pipeline::{Pipeline, PipelineConfig, PipelineError, Providers, Stage};
use faqrag::prompt_builder::PromptTemplate;
use faqrag::providers::http::{EndpointConfig, HttpChat, HttpEmbedder, HttpReranker};
use faqrag::providers::mock::{MockChat, MockEmbedder, MockReranker};
use faqrag::providers::{ChatMessage, ChatProvider, EmbeddingProvider, ProviderErrorKind, RerankProvider, RetryPolicy};

#[derive(Default)]
struct Upstream {
    hits: AtomicUsize,
}

async fn embeddings(Json(body): Json<Value>) -> Json<Value> {
    let dim = body["dimensions"].as_u64().unwrap() as usize;
    let vector = MockEmbedder::new(dim).embed(body["input"].as_str().unwrap()).unwrap();
    Json(json!({"data": [{"index": 0, "embedding": vector.values()}]}))
}

async fn chat(Json(body): Json<Value>) -> Json<Value> {
    let messages: Vec<ChatMessage> = serde_json::from_value(body["messages"].clone()).unwrap();
    let reply = MockChat::new().complete(&messages).unwrap();
    Json(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": reply}}]}))
}

async fn rerank(Json(body): Json<Value>) -> Json<Value> {
    let docs: Vec<String> = serde_json::from_value(body["documents"].clone()).unwrap();
    let scores = MockReranker::new().score(body["query"].as_str().unwrap(), &docs).unwrap();
    // Reverse order on the wire; the client must map by index.
    let results: Vec<Value> = scores
        .iter()
        .enumerate()
        .rev()
        .map(|(i, s)| json!({"index": i, "relevance_score": s}))
        .collect();
    Json(json!({"results": results}))
}

async fn failing(State(up): State<Arc<Upstream>>, Path((code, _rest)): Path<(u16, String)>) -> (StatusCode, String) {
    up.hits.fetch_add(1, Ordering::SeqCst);
    (StatusCode::from_u16(code).unwrap(), "upstream says no".into())
}

async fn slow() -> Json<Value> {
    tokio::time::sleep(Duration::from_secs(3)).await;
    Json(json!({}))
}

async fn malformed() -> Json<Value> {
    Json(json!({"unexpected": true}))
}

fn start() -> (SocketAddr, Arc<Upstream>) {
    let up = Arc::new(Upstream::default());
    let app = Router::new()
        .route("/ok/embeddings", post(embeddings))
        .route("/ok/chat/completions", post(chat))
        .route("/ok/rerank", post(rerank))
        .route("/status/{code}/{*rest}", post(failing))
        .route("/slow/{*rest}", post(slow))
        .route("/malformed/{*rest}", post(malformed))
        .with_state(up.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (rx.recv().unwrap(), up)
}

fn endpoint(addr: SocketAddr, prefix: &str) -> EndpointConfig {
    EndpointConfig::new(format!("http://{addr}/{prefix}"))
}

const FAST_RETRY: RetryPolicy = RetryPolicy {
    max_retries: 2,
    base_delay_ms: 1,
};

fn http_providers(addr: SocketAddr, prefix: &str) -> Providers {
    Providers {
        embedder: Arc::new(HttpEmbedder::new(endpoint(addr, prefix), "mock-embedding-v1", 256, FAST_RETRY)),
        chat: Arc::new(HttpChat::new(endpoint(addr, prefix), "mock-chat-v1", 0.0, 512, FAST_RETRY)),
        reranker: Arc::new(HttpReranker::new(endpoint(addr, prefix), "mock-rerank-v1", FAST_RETRY)),
    }
}

#[test]
fn http_pipeline_matches_in_process_mocks() {
    let (addr, _) = start();
    let build = |providers| {
        Pipeline::build(FaqCorpus::bundled(), providers, PromptTemplate::default(), PipelineConfig::default()).unwrap()
    };
    let remote = build(http_providers(addr, "ok"));
    let local = build(Providers::mock(256));
    let first = FaqCorpus::bundled().entries()[0].question.clone();
    for q in [first.as_str(), "amar payment fail hocche keno?", "আমার অ্যাকাউন্ট লক হয়ে গেছে", "How do I cancel my plan?"] {
        let a = remote.answer_query(q).unwrap().without_timings();
        let b = local.answer_query(q).unwrap().without_timings();
        assert_eq!(a, b, "{q}");
    }
}

#[test]
fn rerank_scores_are_mapped_by_index() {
    let (addr, _) = start();
    let r = HttpReranker::new(endpoint(addr, "ok"), "m", FAST_RETRY);
    let docs = ["video buffering".to_owned(), "otp login".to_owned(), "refund".to_owned()];
    let remote = r.score("otp login problem", &docs).unwrap();
    assert_eq!(remote, MockReranker::new().score("otp login problem", &docs).unwrap());
}

#[test]
fn status_codes_map_to_error_kinds() {
    let (addr, up) = start();
    let cases = [
        (401, ProviderErrorKind::AuthFailure, 1),
        (403, ProviderErrorKind::AuthFailure, 1),
        (500, ProviderErrorKind::BadResponse, 1),
        // Retryable: the first try plus two retries.
        (429, ProviderErrorKind::RateLimited, 3),
        (504, ProviderErrorKind::Timeout, 3),
    ];
    for (code, kind, attempts) in cases {
        up.hits.store(0, Ordering::SeqCst);
        let e = HttpEmbedder::new(endpoint(addr, &format!("status/{code}")), "m", 4, FAST_RETRY);
        let err = e.embed("hello").unwrap_err();
        assert_eq!(err.kind, kind, "HTTP {code}");
        assert!(err.detail.contains(&code.to_string()));
        assert_eq!(up.hits.load(Ordering::SeqCst), attempts, "HTTP {code}");
    }
}

#[test]
fn malformed_bodies_are_bad_responses() {
    let (addr, _) = start();
    let e = HttpEmbedder::new(endpoint(addr, "malformed"), "m", 4, FAST_RETRY);
    assert_eq!(e.embed("x").unwrap_err().kind, ProviderErrorKind::BadResponse);
    let c = HttpChat::new(endpoint(addr, "malformed"), "m", 0.0, 16, FAST_RETRY);
    assert_eq!(c.complete(&[ChatMessage::user("x")]).unwrap_err().kind, ProviderErrorKind::BadResponse);
    let r = HttpReranker::new(endpoint(addr, "malformed"), "m", FAST_RETRY);
    assert_eq!(r.score("x", &["a".into()]).unwrap_err().kind, ProviderErrorKind::BadResponse);
}

#[test]
fn slow_upstream_times_out() {
    let (addr, _) = start();
    let mut ep = endpoint(addr, "slow");
    ep.timeout_secs = 1;
    let no_retry = RetryPolicy {
        max_retries: 0,
        base_delay_ms: 1,
    };
    let err = HttpEmbedder::new(ep, "m", 4, no_retry).embed("x").unwrap_err();
    assert_eq!(err.kind, ProviderErrorKind::Timeout);
}

#[test]
fn closed_port_is_unreachable() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let ep = EndpointConfig::new(format!("http://127.0.0.1:{port}"));
    let err = HttpEmbedder::new(ep, "m", 4, FAST_RETRY).embed("x").unwrap_err();
    assert_eq!(err.kind, ProviderErrorKind::Unreachable);
}

#[test]
fn chat_failure_is_reported_at_first_chat_stage() {
    let (addr, _) = start();
    let mut providers = http_providers(addr, "ok");
    providers.chat = Arc::new(HttpChat::new(endpoint(addr, "status/500"), "m", 0.0, 16, FAST_RETRY));
    let p = Pipeline::build(FaqCorpus::bundled(), providers, PromptTemplate::default(), PipelineConfig::default()).unwrap();
    // Every non-cache query is translated first, whatever its script.
    let err = p.answer_query("amar payment fail hocche keno?").unwrap_err();
    assert!(matches!(err, PipelineError::Provider { stage: Stage::Translate, .. }), "{err:?}");
}
