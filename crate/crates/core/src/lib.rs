//! Multilingual FAQ answering with a semantic cache and retrieval-augmented
//! generation over a customer-service knowledge base.

pub mod config;
pub mod embedding_store;
pub mod evaluation;
pub mod knowledge_base;
pub mod language;
pub mod pipeline;
pub mod prompt_builder;
pub mod providers;
pub mod service;

pub use embedding_store::{build_index, cosine_similarity, EmbeddingIndex, EmbeddingVector, IndexKind, ScoredHit};
pub use knowledge_base::{load_faq_corpus, lookup_answer, sample_faqs, FaqCorpus, FaqEntry, FaqId, FaqLanguage};
pub use language::{detect_language_and_script, LanguageTag};
pub use pipeline::{AnswerSource, ChatResponse, Pipeline, PipelineConfig, PipelineError, Providers};
pub use prompt_builder::{build_prompt, PromptTemplate};
