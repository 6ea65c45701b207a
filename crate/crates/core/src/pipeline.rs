//! Query answering: embed, check the FAQ cache, and on a miss translate,
//! retrieve, rerank and generate.
//!
//! The cache compares the raw query embedding with question-only embeddings
//! and hits only when the best similarity is strictly greater than the
//! threshold. Every cache miss is translated to English before retrieval, and
//! the reranker sees the translated query too.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_store::{combined_document_text, EmbeddingIndex, EmbeddingVector, IndexError, IndexKind, ScoredHit};
use crate::knowledge_base::{lookup_answer, FaqCorpus, FaqId};
use crate::language::{detect_language_and_script, LanguageTag};
use crate::prompt_builder::{ContextBlock, PromptError, PromptTemplate};
use crate::providers::{
    embed_text, generate_chat, rerank, translate_to_english, ChatProvider, EmbeddingProvider, ProviderError,
    RerankProvider,
};

pub use crate::language::detect_language_and_script as detect_language;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub cache_threshold: f64,
    pub k_retrieve: usize,
    pub k_rerank: usize,
    pub rerank_enabled: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cache_threshold: 0.8,
            k_retrieve: 5,
            k_rerank: 3,
            rerank_enabled: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.cache_threshold > 0.0 && self.cache_threshold <= 1.0) {
            return Err(PipelineError::Config(format!(
                "cache_threshold must be in (0, 1], got {}",
                self.cache_threshold
            )));
        }
        if self.k_rerank == 0 || self.k_retrieve == 0 {
            return Err(PipelineError::Config("k_retrieve and k_rerank must be at least 1".into()));
        }
        if self.k_rerank > self.k_retrieve {
            return Err(PipelineError::Config(format!(
                "k_rerank ({}) exceeds k_retrieve ({})",
                self.k_rerank, self.k_retrieve
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    EmbedQuery,
    CacheCheck,
    Translate,
    EmbedTranslated,
    Retrieve,
    Rerank,
    Generate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("{stage} failed: {source}")]
    Provider {
        stage: Stage,
        #[source]
        source: ProviderError,
    },
    #[error("{stage} failed: {source}")]
    Index {
        stage: Stage,
        #[source]
        source: IndexError,
    },
    #[error("prompt error: {0}")]
    Prompt(#[from] PromptError),
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("retrieved FAQ {0} is not in the corpus")]
    UnknownContext(FaqId),
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Provider { stage, .. } | PipelineError::Index { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerSource {
    Cache,
    Generated,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub micros: u64,
}

/// Provider calls made while answering one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCalls {
    pub embedding: u32,
    pub translation: u32,
    pub rerank: u32,
    pub chat: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub answer: String,
    pub source: AnswerSource,
    pub matched_faq_id: Option<FaqId>,
    pub context_ids: Vec<FaqId>,
    /// Best question similarity seen by the cache check.
    pub cache_score: Option<f64>,
    pub translated_query: Option<String>,
    pub detected_language: LanguageTag,
    pub timings: Vec<StageTiming>,
    pub provider_calls: ProviderCalls,
}

impl ChatResponse {
    /// Copy with timings cleared, for comparing runs.
    pub fn without_timings(&self) -> ChatResponse {
        ChatResponse {
            timings: Vec::new(),
            ..self.clone()
        }
    }
}

/// A response together with the candidate lists seen on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerTrace {
    pub response: ChatResponse,
    /// Retrieval hits before reranking (empty on a cache hit).
    pub retrieved: Vec<ScoredHit>,
    /// Hits passed to generation.
    pub reranked: Vec<ScoredHit>,
}

#[derive(Clone)]
pub struct Providers {
    pub embedder: Arc<dyn EmbeddingProvider>,
    pub chat: Arc<dyn ChatProvider>,
    pub reranker: Arc<dyn RerankProvider>,
}

impl Providers {
    pub fn mock(dim: usize) -> Self {
        use crate::providers::mock::{MockChat, MockEmbedder, MockReranker};
        Providers {
            embedder: Arc::new(MockEmbedder::new(dim)),
            chat: Arc::new(MockChat::new()),
            reranker: Arc::new(MockReranker::new()),
        }
    }
}

/// Returns the best-matching FAQ question iff its similarity is strictly
/// greater than `threshold`. Ties go to the earlier corpus entry.
pub fn cache_check(
    query: &EmbeddingVector,
    question_index: &EmbeddingIndex,
    threshold: f64,
) -> Result<Option<(FaqId, f64)>, IndexError> {
    Ok(best_question(query, question_index)?.filter(|(_, score)| *score > threshold))
}

fn best_question(query: &EmbeddingVector, question_index: &EmbeddingIndex) -> Result<Option<(FaqId, f64)>, IndexError> {
    Ok(question_index
        .top_k(query, 1)?
        .into_iter()
        .next()
        .map(|h| (h.faq_id, h.score)))
}

pub fn retrieve_context(
    english_query: &str,
    qa_index: &EmbeddingIndex,
    embedder: &dyn EmbeddingProvider,
    k_retrieve: usize,
) -> Result<Vec<ScoredHit>, PipelineError> {
    let v = embed_text(embedder, english_query).map_err(|source| PipelineError::Provider {
        stage: Stage::EmbedTranslated,
        source,
    })?;
    qa_index
        .top_k(&v, k_retrieve)
        .map_err(|source| PipelineError::Index {
            stage: Stage::Retrieve,
            source,
        })
}

/// Reorders `hits` by reranker relevance and keeps the best `k_rerank`.
/// Equal scores keep retrieval order. Returned scores are reranker scores.
pub fn rerank_context(
    query: &str,
    hits: &[ScoredHit],
    corpus: &FaqCorpus,
    reranker: &dyn RerankProvider,
    k_rerank: usize,
) -> Result<Vec<ScoredHit>, PipelineError> {
    let candidates = hits
        .iter()
        .map(|h| {
            corpus
                .get(&h.faq_id)
                .map(combined_document_text)
                .ok_or_else(|| PipelineError::UnknownContext(h.faq_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut scored = rerank(reranker, query, &candidates).map_err(|source| PipelineError::Provider {
        stage: Stage::Rerank,
        source,
    })?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(scored
        .into_iter()
        .take(k_rerank)
        .enumerate()
        .map(|(pos, (i, score))| ScoredHit {
            faq_id: hits[i].faq_id.clone(),
            score,
            rank: pos + 1,
        })
        .collect())
}

fn fallback_answer(lang: LanguageTag) -> &'static str {
    match lang {
        LanguageTag::English => "I'm sorry, I could not find information about this. Could you share more details, or would you like me to connect you with a human operator?",
        LanguageTag::Bengali => "দুঃখিত, এ বিষয়ে কোনো তথ্য খুঁজে পাইনি। আরও বিস্তারিত জানাবেন, অথবা আমি কি আপনাকে একজন মানব অপারেটরের সাথে যুক্ত করে দেব?",
        LanguageTag::Banglish => "Dukkhito, ei bishoye kono tothyo khuje paini. Arektu bistarito janaben, naki ami apnake ekjon human operator er sathe jogajog kore debo?",
    }
}

struct Timer {
    timings: Vec<StageTiming>,
}

impl Timer {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage,
            micros: start.elapsed().as_micros() as u64,
        });
        out
    }
}

/// Shared, immutable answering engine. Safe to call from many threads.
#[derive(Clone)]
pub struct Pipeline {
    corpus: Arc<FaqCorpus>,
    question_index: Arc<EmbeddingIndex>,
    qa_index: Arc<EmbeddingIndex>,
    providers: Providers,
    template: Arc<PromptTemplate>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        corpus: Arc<FaqCorpus>,
        question_index: Arc<EmbeddingIndex>,
        qa_index: Arc<EmbeddingIndex>,
        providers: Providers,
        template: PromptTemplate,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        template.validate()?;
        for (index, kind) in [(&question_index, IndexKind::QuestionOnly), (&qa_index, IndexKind::CombinedQa)] {
            if index.kind() != kind {
                return Err(PipelineError::Config(format!("expected a {kind:?} index, got {:?}", index.kind())));
            }
            index.verify_against(&corpus).map_err(|source| PipelineError::Index {
                stage: Stage::Retrieve,
                source,
            })?;
            if index.dim() != providers.embedder.dim() {
                return Err(PipelineError::Config(format!(
                    "index dimension {} does not match embedder dimension {}",
                    index.dim(),
                    providers.embedder.dim()
                )));
            }
        }
        Ok(Pipeline {
            corpus,
            question_index,
            qa_index,
            providers,
            template: Arc::new(template),
            config,
        })
    }

    /// Builds both indexes in memory with the configured embedder.
    pub fn build(
        corpus: FaqCorpus,
        providers: Providers,
        template: PromptTemplate,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        let index = |kind| {
            crate::embedding_store::build_index(&corpus, providers.embedder.as_ref(), kind).map_err(|source| {
                PipelineError::Index {
                    stage: Stage::EmbedQuery,
                    source,
                }
            })
        };
        let q = Arc::new(index(IndexKind::QuestionOnly)?);
        let qa = Arc::new(index(IndexKind::CombinedQa)?);
        Self::new(Arc::new(corpus), q, qa, providers, template, config)
    }

    pub fn corpus(&self) -> &FaqCorpus {
        &self.corpus
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn providers(&self) -> &Providers {
        &self.providers
    }

    pub fn question_index(&self) -> &EmbeddingIndex {
        &self.question_index
    }

    pub fn qa_index(&self) -> &EmbeddingIndex {
        &self.qa_index
    }

    pub fn answer_query(&self, query: &str) -> Result<ChatResponse, PipelineError> {
        self.answer_query_traced(query).map(|t| t.response)
    }

    pub fn answer_query_traced(&self, query: &str) -> Result<AnswerTrace, PipelineError> {
        let lang = detect_language_and_script(query).map_err(|_| PipelineError::EmptyQuery)?;
        let mut timer = Timer { timings: Vec::new() };
        let mut calls = ProviderCalls::default();
        let provider_err = |stage| move |source| PipelineError::Provider { stage, source };
        let index_err = |stage| move |source| PipelineError::Index { stage, source };

        calls.embedding += 1;
        let query_vec = timer
            .time(Stage::EmbedQuery, || embed_text(self.providers.embedder.as_ref(), query))
            .map_err(provider_err(Stage::EmbedQuery))?;
        let best = timer
            .time(Stage::CacheCheck, || best_question(&query_vec, &self.question_index))
            .map_err(index_err(Stage::CacheCheck))?;
        let cache_score = best.as_ref().map(|(_, s)| *s);

        if let Some((faq_id, _)) = best.filter(|(_, s)| *s > self.config.cache_threshold) {
            let answer = lookup_answer(&self.corpus, &faq_id)
                .map_err(|_| PipelineError::UnknownContext(faq_id.clone()))?
                .to_owned();
            return Ok(AnswerTrace {
                response: ChatResponse {
                    answer,
                    source: AnswerSource::Cache,
                    matched_faq_id: Some(faq_id),
                    context_ids: Vec::new(),
                    cache_score,
                    translated_query: None,
                    detected_language: lang,
                    timings: timer.timings,
                    provider_calls: calls,
                },
                retrieved: Vec::new(),
                reranked: Vec::new(),
            });
        }

        calls.translation += 1;
        let english = timer
            .time(Stage::Translate, || translate_to_english(self.providers.chat.as_ref(), query))
            .map_err(provider_err(Stage::Translate))?;

        calls.embedding += 1;
        let english_vec = timer
            .time(Stage::EmbedTranslated, || embed_text(self.providers.embedder.as_ref(), &english))
            .map_err(provider_err(Stage::EmbedTranslated))?;
        let retrieved = timer
            .time(Stage::Retrieve, || self.qa_index.top_k(&english_vec, self.config.k_retrieve))
            .map_err(index_err(Stage::Retrieve))?;

        let reranked = if retrieved.is_empty() {
            Vec::new()
        } else if self.config.rerank_enabled {
            calls.rerank += 1;
            timer.time(Stage::Rerank, || {
                rerank_context(
                    &english,
                    &retrieved,
                    &self.corpus,
                    self.providers.reranker.as_ref(),
                    self.config.k_rerank,
                )
            })?
        } else {
            retrieved.iter().take(self.config.k_rerank).cloned().collect()
        };

        let response = self.respond_with_context(query, english, &reranked, lang, cache_score, timer, calls)?;
        Ok(AnswerTrace {
            response,
            retrieved,
            reranked,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn respond_with_context(
        &self,
        query: &str,
        english: String,
        hits: &[ScoredHit],
        lang: LanguageTag,
        cache_score: Option<f64>,
        mut timer: Timer,
        mut calls: ProviderCalls,
    ) -> Result<ChatResponse, PipelineError> {
        if hits.is_empty() {
            return Ok(ChatResponse {
                answer: fallback_answer(lang).to_owned(),
                source: AnswerSource::Fallback,
                matched_faq_id: None,
                context_ids: Vec::new(),
                cache_score,
                translated_query: Some(english),
                detected_language: lang,
                timings: timer.timings,
                provider_calls: calls,
            });
        }
        let contexts = hits
            .iter()
            .map(|h| {
                let e = self
                    .corpus
                    .get(&h.faq_id)
                    .ok_or_else(|| PipelineError::UnknownContext(h.faq_id.clone()))?;
                Ok(ContextBlock {
                    faq_id: e.id.clone(),
                    question: e.question.clone(),
                    answer: e.answer.clone(),
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let prompt = self.template.build_prompt(query, &contexts, lang)?;
        calls.chat += 1;
        let answer = timer
            .time(Stage::Generate, || generate_chat(self.providers.chat.as_ref(), &prompt.to_vec()))
            .map_err(|source| PipelineError::Provider {
                stage: Stage::Generate,
                source,
            })?;
        Ok(ChatResponse {
            answer,
            source: AnswerSource::Generated,
            matched_faq_id: None,
            context_ids: contexts.into_iter().map(|c| c.faq_id).collect(),
            cache_score,
            translated_query: Some(english),
            detected_language: lang,
            timings: timer.timings,
            provider_calls: calls,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_store::build_index;
    use crate::knowledge_base::{FaqEntry, FaqLanguage};
    use crate::prompt_builder::CONTEXT_OPEN;
    use crate::providers::mock::{mock_translation, MockChat, MockEmbedder, MockReranker, TableEmbedder};
    use crate::providers::{ChatMessage, ProviderErrorKind, UnreachableProvider};
    use proptest::prelude::*;
    use std::sync::Mutex;

    struct Mocks {
        embedder: Arc<MockEmbedder>,
        chat: Arc<MockChat>,
        reranker: Arc<MockReranker>,
    }

    impl Mocks {
        fn new() -> Self {
            Mocks {
                embedder: Arc::new(MockEmbedder::new(128)),
                chat: Arc::new(MockChat::new()),
                reranker: Arc::new(MockReranker::new()),
            }
        }

        fn providers(&self) -> Providers {
            Providers {
                embedder: self.embedder.clone(),
                chat: self.chat.clone(),
                reranker: self.reranker.clone(),
            }
        }
    }

    fn pipeline_with(mocks: &Mocks, config: PipelineConfig) -> Pipeline {
        Pipeline::build(FaqCorpus::bundled(), mocks.providers(), PromptTemplate::default(), config).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        for bad in [
            PipelineConfig { cache_threshold: 0.0, ..Default::default() },
            PipelineConfig { cache_threshold: 1.2, ..Default::default() },
            PipelineConfig { k_rerank: 6, ..Default::default() },
            PipelineConfig { k_rerank: 0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(PipelineError::Config(_))));
        }
    }

    #[test]
    fn cache_hit_is_verbatim_and_calls_nothing_else() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        mocks.embedder.calls().reset();
        let entry = &p.corpus().entries()[7].clone();
        let r = p.answer_query(&entry.question).unwrap();
        assert_eq!(r.source, AnswerSource::Cache);
        assert_eq!(r.answer.as_bytes(), entry.answer.as_bytes());
        assert_eq!(r.matched_faq_id.as_ref(), Some(&entry.id));
        assert!(r.context_ids.is_empty());
        assert!((r.cache_score.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(mocks.embedder.calls().get(), 1);
        assert_eq!(mocks.chat.total_calls(), 0);
        assert_eq!(mocks.reranker.calls().get(), 0);
        assert_eq!(
            r.provider_calls,
            ProviderCalls { embedding: 1, ..Default::default() }
        );
        let stages: Vec<_> = r.timings.iter().map(|t| t.stage).collect();
        assert_eq!(stages, [Stage::EmbedQuery, Stage::CacheCheck]);
    }

    #[test]
    fn novel_query_is_generated() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        mocks.embedder.calls().reset();
        let q = "Do you support watching on a smart fridge display?";
        let r = p.answer_query(q).unwrap();
        assert_eq!(r.source, AnswerSource::Generated);
        assert_eq!(r.context_ids.len(), 3);
        assert_eq!(r.translated_query.as_deref(), Some(q));
        assert!(r.answer.starts_with("[mock-chat-v1] Answer to"));
        for id in &r.context_ids {
            assert!(r.answer.contains(id.as_str()));
        }
        assert_eq!(mocks.embedder.calls().get(), 2);
        assert_eq!(mocks.chat.translation_calls().get(), 1);
        assert_eq!(mocks.chat.generation_calls().get(), 1);
        assert_eq!(mocks.reranker.calls().get(), 1);
        assert_eq!(
            r.provider_calls,
            ProviderCalls { embedding: 2, translation: 1, rerank: 1, chat: 1 }
        );
        assert!(r.cache_score.unwrap() <= 0.8);
        let stages: Vec<_> = r.timings.iter().map(|t| t.stage).collect();
        assert_eq!(
            stages,
            [
                Stage::EmbedQuery,
                Stage::CacheCheck,
                Stage::Translate,
                Stage::EmbedTranslated,
                Stage::Retrieve,
                Stage::Rerank,
                Stage::Generate
            ]
        );
    }

    #[test]
    fn bengali_queries_are_translated_too() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let q = "অ্যাপে সাইন ইন করতে খুব দেরি হচ্ছে, একটু দেখবেন?";
        let r = p.answer_query(q).unwrap();
        assert_eq!(r.source, AnswerSource::Generated);
        assert_eq!(r.translated_query, Some(mock_translation(q)));
        assert_eq!(r.detected_language, LanguageTag::Bengali);
    }

    #[test]
    fn banglish_streaming_query_routes_to_troubleshooting() {
        // Long code-switched complaint about a movie that stops loading mid-stream.
        let q = "Notun movie ta dekhte dekhte kichukkhon por r load hocche na, apnader server e eto problem thakle movie gulo streaming e deben kivabe?";
        let chat = Arc::new(RecordingChat::default());
        let mocks = Mocks::new();
        let providers = Providers {
            chat: chat.clone(),
            ..mocks.providers()
        };
        let p = Pipeline::build(FaqCorpus::bundled(), providers, PromptTemplate::default(), PipelineConfig::default()).unwrap();
        let r = p.answer_query(q).unwrap();
        assert_eq!(r.source, AnswerSource::Generated);
        assert_eq!(r.detected_language, LanguageTag::Banglish);
        assert!(r.context_ids[0].as_str().starts_with("stream-"), "{:?}", r.context_ids);
        let prompts = chat.prompts.lock().unwrap();
        let generation = prompts.last().unwrap();
        assert!(generation[0].content.contains("Reply in Bengali written in Roman script (Banglish)."));
        assert_eq!(generation[1].content, q);
        assert!(generation[0].content.contains(&format!("{CONTEXT_OPEN}{}]", r.context_ids[0])));
    }

    #[derive(Default)]
    struct RecordingChat {
        inner: MockChat,
        prompts: Mutex<Vec<Vec<ChatMessage>>>,
    }

    impl ChatProvider for RecordingChat {
        fn model_id(&self) -> &str {
            "recording"
        }
        fn temperature(&self) -> f64 {
            0.0
        }
        fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
            self.prompts.lock().unwrap().push(messages.to_vec());
            self.inner.complete(messages)
        }
    }

    #[test]
    fn rerank_context_cardinality_and_subset() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let hits = retrieve_context("OTP login problem", p.qa_index(), mocks.embedder.as_ref(), 5).unwrap();
        assert_eq!(hits.len(), 5);
        let out = rerank_context("OTP login problem", &hits, p.corpus(), mocks.reranker.as_ref(), 3).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|o| hits.iter().any(|h| h.faq_id == o.faq_id)));
        let two = rerank_context("OTP", &hits[..2], p.corpus(), mocks.reranker.as_ref(), 3).unwrap();
        assert_eq!(two.len(), 2);
    }

    #[test]
    fn rerank_context_puts_exact_match_first() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let target = &p.corpus().entries()[12];
        let doc = combined_document_text(target);
        let hits = retrieve_context(&doc, p.qa_index(), mocks.embedder.as_ref(), 5).unwrap();
        assert_eq!(hits[0].faq_id, target.id);
        assert!((hits[0].score - 1.0).abs() < 1e-9);
        // Move the target to the back so only the reranker can promote it.
        let mut shuffled = hits.clone();
        shuffled.rotate_left(1);
        let out = rerank_context(&doc, &shuffled, p.corpus(), mocks.reranker.as_ref(), 3).unwrap();
        assert_eq!(out[0].faq_id, target.id);
    }

    #[test]
    fn rerank_ties_keep_retrieval_order() {
        struct Flat;
        impl RerankProvider for Flat {
            fn model_id(&self) -> &str {
                "flat"
            }
            fn score(&self, _q: &str, c: &[String]) -> Result<Vec<f64>, ProviderError> {
                Ok(vec![0.5; c.len()])
            }
        }
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let hits = retrieve_context("subscription", p.qa_index(), mocks.embedder.as_ref(), 5).unwrap();
        let out = rerank_context("subscription", &hits, p.corpus(), &Flat, 3).unwrap();
        let ids: Vec<_> = out.iter().map(|h| &h.faq_id).collect();
        let expected: Vec<_> = hits.iter().take(3).map(|h| &h.faq_id).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn rerank_disabled_takes_retrieval_prefix() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig { rerank_enabled: false, ..Default::default() });
        let q = "my coupon discount was not applied to the subscription price";
        let t = p.answer_query_traced(q).unwrap();
        let prefix: Vec<_> = t.retrieved.iter().take(3).map(|h| h.faq_id.clone()).collect();
        assert_eq!(t.response.context_ids, prefix);
        assert_eq!(t.response.provider_calls.rerank, 0);
        assert_eq!(mocks.reranker.calls().get(), 0);
    }

    #[test]
    fn cache_boundary_is_strict() {
        let corpus = FaqCorpus::from_entries(vec![FaqEntry {
            id: "only".into(),
            question: "stored question".into(),
            answer: "stored answer".into(),
            language: FaqLanguage::English,
        }])
        .unwrap();
        let e = TableEmbedder::new(2);
        e.insert("stored question", vec![1.0, 0.0]);
        let index = build_index(&corpus, &e, IndexKind::QuestionOnly).unwrap();
        let exact = EmbeddingVector::new(vec![4.0, 3.0], "t", "q").unwrap();
        assert_eq!(cache_check(&exact, &index, 0.8).unwrap(), None);
        let same = EmbeddingVector::new(vec![2.0, 0.0], "t", "q").unwrap();
        assert_eq!(cache_check(&same, &index, 0.8).unwrap(), Some(("only".into(), 1.0)));
        let wrong = EmbeddingVector::new(vec![1.0, 0.0, 0.0], "t", "q").unwrap();
        assert!(matches!(cache_check(&wrong, &index, 0.8), Err(IndexError::DimensionMismatch { .. })));
    }

    #[test]
    fn paraphrases_either_side_of_threshold() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let score = |text: &str| {
            let v = mocks.embedder.embed(text).unwrap();
            let top = p.question_index().top_k(&v, 1).unwrap().remove(0);
            (top.faq_id, top.score)
        };
        let near = "not receiving the OTP to log in. What can I do? on my phone today";
        let (id, s) = score(near);
        assert_eq!(id.as_str(), "otp-en-01");
        assert!((0.785..0.795).contains(&s), "{s}");
        assert_eq!(p.answer_query(near).unwrap().source, AnswerSource::Generated);

        let close = "I am not receiving the OTP to log in. What can I do? it keeps failing every time";
        let (id, s) = score(close);
        assert!((0.81..0.83).contains(&s), "{s}");
        let r = p.answer_query(close).unwrap();
        assert_eq!(r.source, AnswerSource::Cache);
        assert_eq!(r.matched_faq_id, Some(id));
    }

    #[test]
    fn provider_failures_carry_stage() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let broken_chat = Pipeline {
            providers: Providers {
                chat: Arc::new(UnreachableProvider),
                ..mocks.providers()
            },
            ..p.clone()
        };
        let err = broken_chat.answer_query("something unknown entirely").unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Translate));
        // Cache hits still work without a chat model.
        let q = &p.corpus().entries()[0].question;
        assert_eq!(broken_chat.answer_query(q).unwrap().source, AnswerSource::Cache);

        let broken_embed = Pipeline {
            providers: Providers {
                embedder: Arc::new(UnreachableProvider),
                ..mocks.providers()
            },
            ..p.clone()
        };
        match broken_embed.answer_query("anything").unwrap_err() {
            PipelineError::Provider { stage, source } => {
                assert_eq!(stage, Stage::EmbedQuery);
                assert_eq!(source.kind, ProviderErrorKind::Unreachable);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(p.answer_query("   "), Err(PipelineError::EmptyQuery)));
    }

    #[test]
    fn index_mismatch_rejected_at_construction() {
        let mocks = Mocks::new();
        let corpus = FaqCorpus::bundled();
        let q = Arc::new(build_index(&corpus, mocks.embedder.as_ref(), IndexKind::QuestionOnly).unwrap());
        let qa = Arc::new(build_index(&corpus, mocks.embedder.as_ref(), IndexKind::CombinedQa).unwrap());
        let other = Arc::new(FaqCorpus::from_entries(corpus.entries()[..5].to_vec()).unwrap());
        assert!(Pipeline::new(other, q.clone(), qa.clone(), mocks.providers(), PromptTemplate::default(), PipelineConfig::default()).is_err());
        let swapped = Pipeline::new(Arc::new(corpus), qa, q, mocks.providers(), PromptTemplate::default(), PipelineConfig::default());
        assert!(matches!(swapped, Err(PipelineError::Config(_))));
    }

    #[test]
    fn empty_context_falls_back_without_generation() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        let timer = Timer { timings: Vec::new() };
        let r = p
            .respond_with_context("kichu", "kichu".into(), &[], LanguageTag::Banglish, None, timer, ProviderCalls::default())
            .unwrap();
        assert_eq!(r.source, AnswerSource::Fallback);
        assert!(r.context_ids.is_empty());
        assert!(r.answer.contains("human operator"));
        assert_eq!(mocks.chat.generation_calls().get(), 0);
    }

    #[test]
    fn repeated_calls_identical_apart_from_timings() {
        let mocks = Mocks::new();
        let p = pipeline_with(&mocks, PipelineConfig::default());
        for q in ["amar account e problem hocche", "How do I cancel my subscription?"] {
            let a = p.answer_query(q).unwrap().without_timings();
            let b = p.answer_query(q).unwrap().without_timings();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn raising_threshold_never_creates_hits(
            idx in 0usize..36,
            suffix in prop::sample::select(vec!["", " please", " now", " ki korbo", " asap thanks"]),
            t1 in 0.05f64..1.0,
            t2 in 0.05f64..1.0,
        ) {
            let mocks = Mocks::new();
            let corpus = FaqCorpus::bundled();
            let index = build_index(&corpus, mocks.embedder.as_ref(), IndexKind::QuestionOnly).unwrap();
            let q = format!("{}{}", corpus.entries()[idx].question, suffix);
            let v = mocks.embedder.embed(&q).unwrap();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let hit_hi = cache_check(&v, &index, hi).unwrap();
            let hit_lo = cache_check(&v, &index, lo).unwrap();
            prop_assert!(hit_hi.is_none() || hit_lo == hit_hi);
        }
    }
}
