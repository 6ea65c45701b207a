//! Model provider contracts: embeddings, chat completion (also used for
//! translation) and reranking.
//!
//! `mock` holds deterministic offline implementations; `http` speaks the
//! OpenAI-compatible embeddings/chat API and a `{query, documents}` rerank API.

pub mod http;
pub mod mock;

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_store::EmbeddingVector;

/// Defaults used when a configuration leaves the model unspecified.
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-large";
pub const DEFAULT_CHAT_MODEL: &str = "gpt-4o";
pub const DEFAULT_RERANK_MODEL: &str = "bge-reranker-v2-m3";

/// System instruction used for the query normalization step.
pub const TRANSLATION_INSTRUCTION: &str = "You translate customer service messages into English. \
The message may be written in English, in Bengali script, or in Bengali typed with Roman letters \
(Banglish), possibly mixing languages within a sentence. Reply with the English translation only, \
keeping names, titles, numbers and product terms unchanged. If the message is already English, \
repeat it unchanged.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Timeout,
    AuthFailure,
    RateLimited,
    BadResponse,
    Unreachable,
    /// The caller passed empty text.
    EmptyText,
    /// The request violates the provider contract (for example no messages).
    InvalidRequest,
}

impl ProviderErrorKind {
    pub fn is_retryable(self) -> bool {
        matches!(self, ProviderErrorKind::Timeout | ProviderErrorKind::RateLimited)
    }
}

impl fmt::Display for ProviderErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProviderErrorKind::Timeout => "timeout",
            ProviderErrorKind::AuthFailure => "auth failure",
            ProviderErrorKind::RateLimited => "rate limited",
            ProviderErrorKind::BadResponse => "bad response",
            ProviderErrorKind::Unreachable => "unreachable",
            ProviderErrorKind::EmptyText => "empty text",
            ProviderErrorKind::InvalidRequest => "invalid request",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind}: {detail}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub detail: String,
    pub retryable: bool,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, detail: impl Into<String>) -> Self {
        ProviderError {
            kind,
            detail: detail.into(),
            retryable: kind.is_retryable(),
        }
    }

    pub fn empty_text() -> Self {
        Self::new(ProviderErrorKind::EmptyText, "input text is empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

pub trait ChatProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn temperature(&self) -> f64;
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError>;
}

pub trait RerankProvider: Send + Sync {
    fn model_id(&self) -> &str;
    /// One relevance score per candidate, in candidate order.
    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, ProviderError>;
}

/// Embeds `text`, checking the provider's output against its declared dimension.
pub fn embed_text(provider: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, ProviderError> {
    if text.trim().is_empty() {
        return Err(ProviderError::empty_text());
    }
    let v = provider.embed(text)?;
    if v.dim() != provider.dim() {
        return Err(ProviderError::new(
            ProviderErrorKind::BadResponse,
            format!("expected {} dimensions, got {}", provider.dim(), v.dim()),
        ));
    }
    Ok(v)
}

pub fn generate_chat(provider: &dyn ChatProvider, messages: &[ChatMessage]) -> Result<String, ProviderError> {
    match messages.first() {
        None => {
            return Err(ProviderError::new(ProviderErrorKind::InvalidRequest, "no messages"));
        }
        Some(m) if m.role != Role::System => {
            return Err(ProviderError::new(
                ProviderErrorKind::InvalidRequest,
                "first message must carry the system role",
            ));
        }
        _ => {}
    }
    let text = provider.complete(messages)?;
    if text.trim().is_empty() {
        return Err(ProviderError::new(ProviderErrorKind::BadResponse, "empty completion"));
    }
    Ok(text)
}

/// Translates a query into English through the chat provider.
pub fn translate_to_english(provider: &dyn ChatProvider, query: &str) -> Result<String, ProviderError> {
    if query.trim().is_empty() {
        return Err(ProviderError::empty_text());
    }
    let messages = [ChatMessage::system(TRANSLATION_INSTRUCTION), ChatMessage::user(query)];
    Ok(generate_chat(provider, &messages)?.trim().to_owned())
}

/// Scores every candidate against `query`. Returns `(candidate index, score)` in
/// candidate order; callers sort.
pub fn rerank(
    provider: &dyn RerankProvider,
    query: &str,
    candidates: &[String],
) -> Result<Vec<(usize, f64)>, ProviderError> {
    if candidates.is_empty() {
        return Err(ProviderError::new(ProviderErrorKind::InvalidRequest, "no rerank candidates"));
    }
    let scores = provider.score(query, candidates)?;
    if scores.len() != candidates.len() {
        return Err(ProviderError::new(
            ProviderErrorKind::BadResponse,
            format!("{} scores for {} candidates", scores.len(), candidates.len()),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ProviderError::new(ProviderErrorKind::BadResponse, "non-finite rerank score"));
    }
    Ok(scores.into_iter().enumerate().collect())
}

/// Retries retryable failures with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            base_delay_ms: 250,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << attempt.min(16)))
    }

    pub fn run<T>(&self, mut call: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if e.retryable && attempt < self.max_retries => {
                    tracing::debug!(attempt, error = %e, "retrying provider call");
                    thread::sleep(self.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// A provider whose every call fails as `Unreachable`. Stands in for a dead
/// endpoint in tests and in configurations that must not reach a model.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnreachableProvider;

impl UnreachableProvider {
    fn fail<T>() -> Result<T, ProviderError> {
        Err(ProviderError::new(ProviderErrorKind::Unreachable, "provider endpoint unreachable"))
    }
}

impl EmbeddingProvider for UnreachableProvider {
    fn model_id(&self) -> &str {
        "unreachable"
    }
    fn dim(&self) -> usize {
        1
    }
    fn embed(&self, _text: &str) -> Result<EmbeddingVector, ProviderError> {
        Self::fail()
    }
}

impl ChatProvider for UnreachableProvider {
    fn model_id(&self) -> &str {
        "unreachable"
    }
    fn temperature(&self) -> f64 {
        0.0
    }
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, ProviderError> {
        Self::fail()
    }
}

impl RerankProvider for UnreachableProvider {
    fn model_id(&self) -> &str {
        "unreachable"
    }
    fn score(&self, _query: &str, _candidates: &[String]) -> Result<Vec<f64>, ProviderError> {
        Self::fail()
    }
}
