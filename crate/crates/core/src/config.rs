//! Service configuration: a TOML file plus `FAQRAG_*` environment overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_store::{EmbeddingIndex, IndexError, IndexKind};
use crate::knowledge_base::{load_faq_corpus, CorpusError, FaqCorpus};
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError, Providers};
use crate::prompt_builder::{PromptError, PromptTemplate};
use crate::providers::http::{EndpointConfig, HttpChat, HttpEmbedder, HttpReranker};
use crate::providers::mock::{MockChat, MockEmbedder, MockReranker};
use crate::providers::{RetryPolicy, DEFAULT_CHAT_MODEL, DEFAULT_EMBEDDING_MODEL, DEFAULT_RERANK_MODEL};

pub const DEFAULT_MAX_QUERY_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid value for {name}: {value:?}")]
    Env { name: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("index {path}: {source}")]
    Index {
        path: PathBuf,
        #[source]
        source: IndexError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub kind: ProviderKind,
    pub embedding_model: String,
    pub chat_model: String,
    pub rerank_model: String,
    pub embedding_dim: usize,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub retry: RetryPolicy,
    pub embedding: Option<EndpointConfig>,
    pub chat: Option<EndpointConfig>,
    pub rerank: Option<EndpointConfig>,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        ProvidersConfig {
            kind: ProviderKind::Mock,
            embedding_model: DEFAULT_EMBEDDING_MODEL.into(),
            chat_model: DEFAULT_CHAT_MODEL.into(),
            rerank_model: DEFAULT_RERANK_MODEL.into(),
            embedding_dim: MockEmbedder::DEFAULT_DIM,
            temperature: 0.0,
            max_output_tokens: 1024,
            retry: RetryPolicy::default(),
            embedding: None,
            chat: None,
            rerank: None,
        }
    }
}

impl ProvidersConfig {
    pub fn build(&self) -> Result<Providers, ConfigError> {
        if self.embedding_dim == 0 {
            return Err(ConfigError::Invalid("providers.embedding_dim must be positive".into()));
        }
        match self.kind {
            ProviderKind::Mock => Ok(Providers {
                embedder: Arc::new(MockEmbedder::new(self.embedding_dim)),
                chat: Arc::new(MockChat::new()),
                reranker: Arc::new(MockReranker::new()),
            }),
            ProviderKind::Http => {
                let endpoint = |e: &Option<EndpointConfig>, name: &str| {
                    e.clone()
                        .ok_or_else(|| ConfigError::Invalid(format!("providers.{name} endpoint is required for kind = \"http\"")))
                };
                Ok(Providers {
                    embedder: Arc::new(HttpEmbedder::new(
                        endpoint(&self.embedding, "embedding")?,
                        self.embedding_model.clone(),
                        self.embedding_dim,
                        self.retry,
                    )),
                    chat: Arc::new(HttpChat::new(
                        endpoint(&self.chat, "chat")?,
                        self.chat_model.clone(),
                        self.temperature,
                        self.max_output_tokens,
                        self.retry,
                    )),
                    reranker: Arc::new(HttpReranker::new(
                        endpoint(&self.rerank, "rerank")?,
                        self.rerank_model.clone(),
                        self.retry,
                    )),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// FAQ corpus file; the bundled corpus when unset.
    pub corpus: Option<PathBuf>,
    /// Directory holding prebuilt indexes; built in memory when unset.
    pub index_dir: Option<PathBuf>,
    /// Fixed seed for FAQ sampling. Unset means fresh randomness per request.
    pub faq_sample_seed: Option<u64>,
    pub max_query_chars: usize,
    pub cors_origins: Vec<String>,
    pub prompt_template: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub providers: ProvidersConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            corpus: None,
            index_dir: None,
            faq_sample_seed: None,
            max_query_chars: DEFAULT_MAX_QUERY_CHARS,
            cors_origins: vec!["http://localhost:5173".into()],
            prompt_template: None,
            pipeline: PipelineConfig::default(),
            providers: ProvidersConfig::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Env {
        name: name.into(),
        value: value.into(),
    })
}

fn endpoint_url(slot: &mut Option<EndpointConfig>, url: String) {
    match slot {
        Some(e) => e.base_url = url,
        None => *slot = Some(EndpointConfig::new(url)),
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Reads the file if given (defaults otherwise) and applies the process environment.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply_env(|name| std::env::var(name).ok())?;
        Ok(config)
    }

    /// Overrides fields from `FAQRAG_*` variables looked up through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup("FAQRAG_BIND") {
            self.bind = v;
        }
        if let Some(v) = lookup("FAQRAG_CORPUS") {
            self.corpus = Some(v.into());
        }
        if let Some(v) = lookup("FAQRAG_INDEX_DIR") {
            self.index_dir = Some(v.into());
        }
        if let Some(v) = lookup("FAQRAG_FAQ_SAMPLE_SEED") {
            self.faq_sample_seed = Some(parse_env("FAQRAG_FAQ_SAMPLE_SEED", &v)?);
        }
        if let Some(v) = lookup("FAQRAG_MAX_QUERY_CHARS") {
            self.max_query_chars = parse_env("FAQRAG_MAX_QUERY_CHARS", &v)?;
        }
        if let Some(v) = lookup("FAQRAG_CACHE_THRESHOLD") {
            self.pipeline.cache_threshold = parse_env("FAQRAG_CACHE_THRESHOLD", &v)?;
        }
        if let Some(v) = lookup("FAQRAG_PROVIDER_KIND") {
            self.providers.kind = match v.as_str() {
                "mock" => ProviderKind::Mock,
                "http" => ProviderKind::Http,
                _ => return Err(ConfigError::Env { name: "FAQRAG_PROVIDER_KIND".into(), value: v }),
            };
        }
        if let Some(v) = lookup("FAQRAG_EMBEDDING_URL") {
            endpoint_url(&mut self.providers.embedding, v);
        }
        if let Some(v) = lookup("FAQRAG_CHAT_URL") {
            endpoint_url(&mut self.providers.chat, v);
        }
        if let Some(v) = lookup("FAQRAG_RERANK_URL") {
            endpoint_url(&mut self.providers.rerank, v);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pipeline.validate()?;
        if self.max_query_chars == 0 {
            return Err(ConfigError::Invalid("max_query_chars must be positive".into()));
        }
        Ok(())
    }

    pub fn load_corpus(&self) -> Result<FaqCorpus, ConfigError> {
        Ok(match &self.corpus {
            Some(path) => load_faq_corpus(path)?,
            None => FaqCorpus::bundled(),
        })
    }

    pub fn load_template(&self) -> Result<PromptTemplate, ConfigError> {
        Ok(match &self.prompt_template {
            Some(path) => PromptTemplate::load(path)?,
            None => PromptTemplate::default(),
        })
    }

    /// Assembles the pipeline. Prebuilt indexes are loaded and checked against
    /// the corpus before any provider is called.
    pub fn build_pipeline_with(&self, providers: Providers) -> Result<Pipeline, ConfigError> {
        self.validate()?;
        let corpus = self.load_corpus()?;
        let template = self.load_template()?;
        match &self.index_dir {
            Some(dir) => {
                let load = |kind: IndexKind| {
                    let path = dir.join(kind.file_name());
                    EmbeddingIndex::load_for(&path, &corpus)
                        .map(Arc::new)
                        .map_err(|source| ConfigError::Index { path, source })
                };
                let q = load(IndexKind::QuestionOnly)?;
                let qa = load(IndexKind::CombinedQa)?;
                for index in [&q, &qa] {
                    if index.model_id() != providers.embedder.model_id() {
                        return Err(ConfigError::Invalid(format!(
                            "index was built with {} but the embedder is {}",
                            index.model_id(),
                            providers.embedder.model_id()
                        )));
                    }
                }
                Ok(Pipeline::new(Arc::new(corpus), q, qa, providers, template, self.pipeline)?)
            }
            None => Ok(Pipeline::build(corpus, providers, template, self.pipeline)?),
        }
    }

    pub fn build_pipeline(&self) -> Result<Pipeline, ConfigError> {
        self.build_pipeline_with(self.providers.build()?)
    }
}
