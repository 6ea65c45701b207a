//! HTTP providers: OpenAI-compatible `/embeddings` and `/chat/completions`, and
//! a `/rerank` endpoint taking `{model, query, documents}`.

use std::env;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    ChatMessage, ChatProvider, EmbeddingProvider, ProviderError, ProviderErrorKind, RerankProvider,
    RetryPolicy,
};
use crate::embedding_store::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    30
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }

    fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|name| env::var(name).ok())
    }
}

#[derive(Debug, Clone)]
struct Client {
    endpoint: EndpointConfig,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl Client {
    fn new(endpoint: EndpointConfig, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(endpoint.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Client { endpoint, agent, retry }
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let url = self.endpoint.url(path);
        let key = self.endpoint.api_key();
        self.retry.run(|| {
            let mut req = self.agent.post(&url).header("content-type", "application/json");
            if let Some(key) = &key {
                req = req.header("authorization", format!("Bearer {key}"));
            }
            let mut resp = req.send_json(body).map_err(classify_transport)?;
            let status = resp.status().as_u16();
            if !(200..300).contains(&status) {
                let detail = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(classify_status(status, &detail));
            }
            resp.body_mut()
                .read_json::<serde_json::Value>()
                .map_err(|e| ProviderError::new(ProviderErrorKind::BadResponse, e.to_string()))
        })
    }
}

fn classify_transport(e: ureq::Error) -> ProviderError {
    let kind = match &e {
        ureq::Error::Timeout(_) => ProviderErrorKind::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ProviderErrorKind::Timeout,
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            ProviderErrorKind::Unreachable
        }
        _ => ProviderErrorKind::BadResponse,
    };
    ProviderError::new(kind, e.to_string())
}

fn classify_status(status: u16, body: &str) -> ProviderError {
    let kind = match status {
        401 | 403 => ProviderErrorKind::AuthFailure,
        429 => ProviderErrorKind::RateLimited,
        408 | 504 => ProviderErrorKind::Timeout,
        _ => ProviderErrorKind::BadResponse,
    };
    let mut detail = format!("HTTP {status}");
    if !body.is_empty() {
        detail.push_str(": ");
        detail.extend(body.chars().take(200));
    }
    ProviderError::new(kind, detail)
}

fn bad(detail: impl Into<String>) -> ProviderError {
    ProviderError::new(ProviderErrorKind::BadResponse, detail)
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    client: Client,
    model_id: String,
    dim: usize,
}

impl HttpEmbedder {
    pub fn new(endpoint: EndpointConfig, model_id: impl Into<String>, dim: usize, retry: RetryPolicy) -> Self {
        HttpEmbedder {
            client: Client::new(endpoint, retry),
            model_id: model_id.into(),
            dim,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let body = json!({"model": self.model_id, "input": text, "dimensions": self.dim});
        let resp = self.client.post("embeddings", &body)?;
        let values = resp["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| bad("missing data[0].embedding"))?
            .iter()
            .map(|v| v.as_f64().map(|x| x as f32).ok_or_else(|| bad("non-numeric embedding value")))
            .collect::<Result<Vec<f32>, _>>()?;
        EmbeddingVector::new(values, self.model_id.clone(), text).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct HttpChat {
    client: Client,
    model_id: String,
    temperature: f64,
    max_output_tokens: u32,
}

impl HttpChat {
    pub fn new(
        endpoint: EndpointConfig,
        model_id: impl Into<String>,
        temperature: f64,
        max_output_tokens: u32,
        retry: RetryPolicy,
    ) -> Self {
        HttpChat {
            client: Client::new(endpoint, retry),
            model_id: model_id.into(),
            temperature,
            max_output_tokens,
        }
    }
}

impl ChatProvider for HttpChat {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.model_id,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
        });
        let resp = self.client.post("chat/completions", &body)?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| bad("missing choices[0].message.content"))
    }
}

#[derive(Debug, Clone)]
pub struct HttpReranker {
    client: Client,
    model_id: String,
}

impl HttpReranker {
    pub fn new(endpoint: EndpointConfig, model_id: impl Into<String>, retry: RetryPolicy) -> Self {
        HttpReranker {
            client: Client::new(endpoint, retry),
            model_id: model_id.into(),
        }
    }
}

/// Accepts `{"results": [...]}` or a bare array; items carry `index` and either
/// `relevance_score` or `score`.
fn parse_rerank(resp: &serde_json::Value, n: usize) -> Result<Vec<f64>, ProviderError> {
    let items = resp
        .get("results")
        .unwrap_or(resp)
        .as_array()
        .ok_or_else(|| bad("rerank response is not a list"))?;
    let mut scores = vec![None; n];
    for item in items {
        let index = item["index"].as_u64().ok_or_else(|| bad("rerank item without index"))? as usize;
        let score = item
            .get("relevance_score")
            .or_else(|| item.get("score"))
            .and_then(|s| s.as_f64())
            .ok_or_else(|| bad("rerank item without score"))?;
        let slot = scores.get_mut(index).ok_or_else(|| bad("rerank index out of range"))?;
        *slot = Some(score);
    }
    scores
        .into_iter()
        .map(|s| s.ok_or_else(|| bad("rerank response missing a candidate")))
        .collect()
}

impl RerankProvider for HttpReranker {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, ProviderError> {
        let body = json!({"model": self.model_id, "query": query, "documents": candidates});
        let resp = self.client.post("rerank", &body)?;
        parse_rerank(&resp, candidates.len())
    }
}
