//! Deterministic offline providers.
//!
//! Every mock is a pure function of its input bytes, so end-to-end runs can be
//! compared byte for byte. Each mock counts its calls.
//!
//! * [`MockEmbedder`] hashes word and character-trigram features of the text
//!   into seeded pseudo-random vectors and sums them. Identical texts give
//!   identical vectors; lexically close texts give close vectors.
//! * [`MockChat`] answers translation requests by passing Roman-script text
//!   through unchanged and tagging Bengali-script text as
//!   `EN(<8 hex of sha256>): <original>`. Any other request gets a canned reply
//!   quoting the last user message and the context ids found in the prompt.
//! * [`MockReranker`] scores candidates by unigram and bigram overlap with the query.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{ChatMessage, ChatProvider, EmbeddingProvider, ProviderError, ProviderErrorKind, RerankProvider, Role};
use super::TRANSLATION_INSTRUCTION;
use crate::embedding_store::EmbeddingVector;
use crate::language::{contains_bengali, is_bengali_char};
use crate::prompt_builder::CONTEXT_OPEN;

pub const MOCK_EMBEDDING_MODEL: &str = "mock-embedding-v1";
pub const MOCK_CHAT_MODEL: &str = "mock-chat-v1";
pub const MOCK_RERANK_MODEL: &str = "mock-rerank-v1";

const WORD_WEIGHT: f32 = 1.0;
const TRIGRAM_WEIGHT: f32 = 0.5;

#[derive(Debug, Default)]
pub struct CallCounter(AtomicUsize);

impl CallCounter {
    fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::SeqCst);
    }
}

/// Lowercased word tokens. Bengali-block characters count as word characters so
/// that vowel signs and virama do not split words.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || is_bengali_char(c)))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn normalized(text: &str) -> String {
    tokens(text).join(" ")
}

#[derive(Debug)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
    calls: CallCounter,
}

impl MockEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, 0x05ee_dfa0)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockEmbedder {
            dim,
            seed,
            calls: CallCounter::default(),
        }
    }

    pub fn calls(&self) -> &CallCounter {
        &self.calls
    }

    fn add_feature(&self, acc: &mut [f32], kind: u8, feature: &str, weight: f32) {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update([kind]);
        h.update(feature.as_bytes());
        let digest: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        for v in acc.iter_mut() {
            *v += weight * rng.random_range(-1.0f32..1.0);
        }
    }

    /// Raw vector for `text`, without call accounting.
    pub fn vector_for(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0f32; self.dim];
        let toks = tokens(text);
        for t in &toks {
            self.add_feature(&mut acc, b'w', t, WORD_WEIGHT);
        }
        let padded: Vec<char> = format!(" {} ", normalized(text)).chars().collect();
        for w in padded.windows(3) {
            let tri: String = w.iter().collect();
            self.add_feature(&mut acc, b't', &tri, TRIGRAM_WEIGHT);
        }
        // Exact text identity, so texts that normalize alike still differ.
        self.add_feature(&mut acc, b'x', text, TRIGRAM_WEIGHT);
        acc
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn model_id(&self) -> &str {
        MOCK_EMBEDDING_MODEL
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        self.calls.bump();
        if text.trim().is_empty() {
            return Err(ProviderError::empty_text());
        }
        EmbeddingVector::new(self.vector_for(text), MOCK_EMBEDDING_MODEL, text)
            .map_err(|e| ProviderError::new(ProviderErrorKind::BadResponse, e.to_string()))
    }
}

/// Embedder backed by an explicit text-to-vector table, for constructing exact
/// similarity scenarios. Unknown texts fall back to an inner [`MockEmbedder`].
#[derive(Debug)]
pub struct TableEmbedder {
    table: Mutex<HashMap<String, Vec<f32>>>,
    fallback: MockEmbedder,
}

impl TableEmbedder {
    pub fn new(dim: usize) -> Self {
        TableEmbedder {
            table: Mutex::new(HashMap::new()),
            fallback: MockEmbedder::new(dim),
        }
    }

    pub fn insert(&self, text: impl Into<String>, vector: Vec<f32>) {
        assert_eq!(vector.len(), self.fallback.dim, "vector dimension");
        self.table.lock().unwrap().insert(text.into(), vector);
    }

    pub fn calls(&self) -> &CallCounter {
        self.fallback.calls()
    }
}

impl EmbeddingProvider for TableEmbedder {
    fn model_id(&self) -> &str {
        "table-embedding"
    }

    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let known = self.table.lock().unwrap().get(text).cloned();
        match known {
            Some(v) => {
                self.fallback.calls.bump();
                EmbeddingVector::new(v, "table-embedding", text)
                    .map_err(|e| ProviderError::new(ProviderErrorKind::BadResponse, e.to_string()))
            }
            None => self.fallback.embed(text),
        }
    }
}

#[derive(Debug, Default)]
pub struct MockChat {
    translations: CallCounter,
    generations: CallCounter,
}

impl MockChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn translation_calls(&self) -> &CallCounter {
        &self.translations
    }

    pub fn generation_calls(&self) -> &CallCounter {
        &self.generations
    }

    pub fn total_calls(&self) -> usize {
        self.translations.get() + self.generations.get()
    }

    pub fn reset(&self) {
        self.translations.reset();
        self.generations.reset();
    }
}

/// The mock translation rule, exposed so tests can state expectations directly.
pub fn mock_translation(query: &str) -> String {
    if contains_bengali(query) {
        let digest = hex::encode(Sha256::digest(query.as_bytes()));
        format!("EN({}): {}", &digest[..8], query)
    } else {
        query.to_owned()
    }
}

/// Context ids referenced by `[context id=...]` markers, in order of appearance.
pub fn context_ids_in(text: &str) -> Vec<String> {
    text.match_indices(CONTEXT_OPEN)
        .filter_map(|(i, _)| {
            let rest = &text[i + CONTEXT_OPEN.len()..];
            rest.find(']').map(|end| rest[..end].to_owned())
        })
        .collect()
}

impl ChatProvider for MockChat {
    fn model_id(&self) -> &str {
        MOCK_CHAT_MODEL
    }

    fn temperature(&self) -> f64 {
        0.0
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let last_user = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .ok_or_else(|| ProviderError::new(ProviderErrorKind::InvalidRequest, "no user message"))?;
        let is_translation = messages
            .first()
            .is_some_and(|m| m.role == Role::System && m.content == TRANSLATION_INSTRUCTION);
        if is_translation {
            self.translations.bump();
            return Ok(mock_translation(last_user));
        }
        self.generations.bump();
        let ids: Vec<String> = messages
            .iter()
            .filter(|m| m.role == Role::System)
            .flat_map(|m| context_ids_in(&m.content))
            .collect();
        let grounding = if ids.is_empty() {
            "no context".to_owned()
        } else {
            ids.join(", ")
        };
        Ok(format!("[{MOCK_CHAT_MODEL}] Answer to \"{last_user}\" grounded in: {grounding}"))
    }
}

#[derive(Debug, Default)]
pub struct MockReranker {
    calls: CallCounter,
}

impl MockReranker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> &CallCounter {
        &self.calls
    }
}

fn multiset<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

fn weighted_jaccard<T: std::hash::Hash + Eq>(a: &HashMap<T, usize>, b: &HashMap<T, usize>) -> Option<f64> {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    union += b.iter().filter(|(k, _)| !a.contains_key(*k)).map(|(_, c)| c).sum::<usize>();
    (union > 0).then(|| inter as f64 / union as f64)
}

/// Token-overlap relevance in [0, 1]: mean of unigram and bigram multiset Jaccard.
pub fn overlap_score(query: &str, candidate: &str) -> f64 {
    let q = tokens(query);
    let c = tokens(candidate);
    let uni = weighted_jaccard(&multiset(q.iter()), &multiset(c.iter())).unwrap_or(0.0);
    let bi = weighted_jaccard(&multiset(q.windows(2)), &multiset(c.windows(2))).unwrap_or(uni);
    0.5 * uni + 0.5 * bi
}

impl RerankProvider for MockReranker {
    fn model_id(&self) -> &str {
        MOCK_RERANK_MODEL
    }

    fn score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, ProviderError> {
        self.calls.bump();
        Ok(candidates.iter().map(|c| overlap_score(query, c)).collect())
    }
}
