//! FAQ corpus loading and read-only access.
//!
//! The corpus is a JSON-lines file, one question/answer pair per line. It is
//! both the source of the semantic cache and the fact base for retrieval, and
//! is never mutated after load.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::language::contains_bengali;

/// Bundled synthetic corpus shipped with the crate.
pub const BUNDLED_CORPUS: &str = include_str!("../corpus/synthetic_faq.jsonl");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    MissingFile(PathBuf),
    #[error("corpus parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate FAQ id {0:?}")]
    DuplicateId(String),
    #[error("FAQ {id:?} has an empty {field}")]
    EmptyField { id: String, field: &'static str },
    #[error("FAQ {id:?} is tagged Bengali but its question has no Bengali script")]
    LanguageMismatch { id: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("requested {requested} FAQs but the corpus holds {available}")]
    NTooLarge { requested: usize, available: usize },
    #[error("sample size must be at least 1")]
    NTooSmall,
    #[error("unknown FAQ id {0:?}")]
    UnknownId(String),
    #[error("io error reading corpus: {0}")]
    Io(String),
}

/// Language of a stored FAQ pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaqLanguage {
    #[serde(rename = "en")]
    English,
    #[serde(rename = "bn")]
    Bengali,
}

impl fmt::Display for FaqLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaqLanguage::English => "en",
            FaqLanguage::Bengali => "bn",
        })
    }
}

/// Stable identifier of a FAQ entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaqId(String);

impl FaqId {
    pub fn new(id: impl Into<String>) -> Self {
        FaqId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FaqId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FaqId {
    fn from(s: &str) -> Self {
        FaqId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaqEntry {
    pub id: FaqId,
    pub question: String,
    pub answer: String,
    pub language: FaqLanguage,
}

impl FaqEntry {
    fn validate(&self) -> Result<(), CorpusError> {
        if self.id.as_str().trim().is_empty() {
            return Err(CorpusError::EmptyField {
                id: self.id.to_string(),
                field: "id",
            });
        }
        for (field, value) in [("question", &self.question), ("answer", &self.answer)] {
            if value.trim().is_empty() {
                return Err(CorpusError::EmptyField {
                    id: self.id.to_string(),
                    field,
                });
            }
        }
        if self.language == FaqLanguage::Bengali && !contains_bengali(&self.question) {
            return Err(CorpusError::LanguageMismatch {
                id: self.id.to_string(),
            });
        }
        Ok(())
    }
}

/// Share of each language among the corpus entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LanguageDistribution {
    pub english_fraction: f64,
    pub bengali_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaqCorpus {
    entries: Vec<FaqEntry>,
    source_path: String,
    checksum: String,
}

impl FaqCorpus {
    /// Parses corpus text. `source` is only recorded for diagnostics.
    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FaqEntry =
                serde_json::from_str(line).map_err(|e| CorpusError::ParseError {
                    line: lineno + 1,
                    message: e.to_string(),
                })?;
            entry.validate()?;
            if !seen.insert(entry.id.clone()) {
                return Err(CorpusError::DuplicateId(entry.id.to_string()));
            }
            entries.push(entry);
        }
        Ok(FaqCorpus {
            entries,
            source_path: source.into(),
            checksum: content_checksum(text.as_bytes()),
        })
    }

    /// Builds a corpus from already-constructed entries, enforcing the same invariants
    /// as file loading. The checksum covers the canonical JSON-lines serialization.
    pub fn from_entries(entries: Vec<FaqEntry>) -> Result<Self, CorpusError> {
        let mut text = String::new();
        for e in &entries {
            text.push_str(&serde_json::to_string(e).expect("FaqEntry serializes"));
            text.push('\n');
        }
        Self::parse(&text, "<memory>")
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CORPUS, "<bundled>").expect("bundled corpus is valid")
    }

    pub fn entries(&self) -> &[FaqEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    /// Hex SHA-256 of the corpus bytes.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn get(&self, id: &FaqId) -> Option<&FaqEntry> {
        self.entries.iter().find(|e| &e.id == id)
    }

    /// File-order position of an entry.
    pub fn position(&self, id: &FaqId) -> Option<usize> {
        self.entries.iter().position(|e| &e.id == id)
    }
}

pub fn content_checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_faq_corpus(path: impl AsRef<Path>) -> Result<FaqCorpus, CorpusError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CorpusError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| CorpusError::Io(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| CorpusError::ParseError {
        line: 0,
        message: format!("invalid UTF-8: {e}"),
    })?;
    FaqCorpus::parse(&text, path.display().to_string())
}

/// Draws `n` distinct entries. The same seed always yields the same sample,
/// returned in draw order.
pub fn sample_faqs(corpus: &FaqCorpus, n: usize, seed: u64) -> Result<Vec<&FaqEntry>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::NTooSmall);
    }
    if n > corpus.len() {
        return Err(CorpusError::NTooLarge {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, corpus.len(), n)
        .into_iter()
        .map(|i| &corpus.entries[i])
        .collect())
}

pub fn lookup_answer<'a>(corpus: &'a FaqCorpus, id: &FaqId) -> Result<&'a str, CorpusError> {
    corpus
        .get(id)
        .map(|e| e.answer.as_str())
        .ok_or_else(|| CorpusError::UnknownId(id.to_string()))
}

pub fn corpus_stats(corpus: &FaqCorpus) -> Result<LanguageDistribution, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let total = corpus.len() as f64;
    let english = corpus
        .entries()
        .iter()
        .filter(|e| e.language == FaqLanguage::English)
        .count() as f64;
    Ok(LanguageDistribution {
        english_fraction: english / total,
        bengali_fraction: (total - english) / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn line(id: &str, q: &str, a: &str, lang: &str) -> String {
        serde_json::json!({"id": id, "question": q, "answer": a, "language": lang}).to_string()
    }

    #[test]
    fn loads_two_entries_in_file_order() {
        let text = [
            line("faq-1", "How?", "Like this.", "en"),
            line("faq-2", "কেন?", "এই জন্য।", "bn"),
        ]
        .join("\n");
        let corpus = FaqCorpus::parse(&text, "t").unwrap();
        let ids: Vec<_> = corpus.entries().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["faq-1", "faq-2"]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = [
            line("faq-7", "a?", "b", "en"),
            line("faq-7", "c?", "d", "en"),
        ]
        .join("\n");
        assert_eq!(
            FaqCorpus::parse(&text, "t"),
            Err(CorpusError::DuplicateId("faq-7".into()))
        );
    }

    #[test]
    fn empty_field_and_parse_errors() {
        let text = line("faq-1", "   ", "b", "en");
        assert_eq!(
            FaqCorpus::parse(&text, "t"),
            Err(CorpusError::EmptyField {
                id: "faq-1".into(),
                field: "question"
            })
        );
        let text = format!("{}\n{{not json", line("faq-1", "q", "a", "en"));
        assert!(matches!(
            FaqCorpus::parse(&text, "t"),
            Err(CorpusError::ParseError { line: 2, .. })
        ));
        let text = r#"{"id":"x","question":"q","answer":"a","language":"fr"}"#;
        assert!(matches!(
            FaqCorpus::parse(text, "t"),
            Err(CorpusError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn bengali_tag_requires_bengali_script() {
        let text = line("faq-1", "Roman only?", "a", "bn");
        assert_eq!(
            FaqCorpus::parse(&text, "t"),
            Err(CorpusError::LanguageMismatch { id: "faq-1".into() })
        );
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_faq_corpus("/definitely/not/here.jsonl"),
            Err(CorpusError::MissingFile(_))
        ));
    }

    #[test]
    fn load_twice_same_checksum() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(BUNDLED_CORPUS.as_bytes()).unwrap();
        let a = load_faq_corpus(f.path()).unwrap();
        let b = load_faq_corpus(f.path()).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        assert_eq!(a.entries(), b.entries());
        assert_eq!(a.checksum(), FaqCorpus::bundled().checksum());
    }

    #[test]
    fn bundled_corpus_split() {
        let corpus = FaqCorpus::bundled();
        assert_eq!(corpus.len(), 36);
        let en = corpus
            .entries()
            .iter()
            .filter(|e| e.language == FaqLanguage::English)
            .count();
        assert_eq!(en, 22);
        let stats = corpus_stats(&corpus).unwrap();
        assert!((stats.english_fraction - 22.0 / 36.0).abs() < 1e-12);
        assert!((stats.english_fraction - 0.61).abs() < 0.005);
        assert!((stats.english_fraction + stats.bengali_fraction - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stats_edge_cases() {
        let corpus = FaqCorpus::parse(&line("a", "q", "a", "en"), "t").unwrap();
        let stats = corpus_stats(&corpus).unwrap();
        assert_eq!((stats.english_fraction, stats.bengali_fraction), (1.0, 0.0));
        let empty = FaqCorpus::parse("", "t").unwrap();
        assert_eq!(corpus_stats(&empty), Err(CorpusError::EmptyCorpus));
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let corpus = FaqCorpus::bundled();
        let a = sample_faqs(&corpus, 3, 1).unwrap();
        let b = sample_faqs(&corpus, 3, 1).unwrap();
        assert_eq!(a, b);
        let ids: HashSet<_> = a.iter().map(|e| &e.id).collect();
        assert_eq!(ids.len(), 3);

        let small = FaqCorpus::from_entries(corpus.entries()[..3].to_vec()).unwrap();
        let all: HashSet<_> = sample_faqs(&small, 3, 99).unwrap().into_iter().map(|e| &e.id).collect();
        assert_eq!(all.len(), 3);

        let two = FaqCorpus::from_entries(corpus.entries()[..2].to_vec()).unwrap();
        assert_eq!(
            sample_faqs(&two, 3, 0),
            Err(CorpusError::NTooLarge {
                requested: 3,
                available: 2
            })
        );
        assert_eq!(sample_faqs(&two, 0, 0), Err(CorpusError::NTooSmall));
    }

    #[test]
    fn seed_sweep_covers_every_entry() {
        let corpus = FaqCorpus::bundled();
        let mut seen = HashSet::new();
        for seed in 0..(10 * corpus.len() as u64) {
            for e in sample_faqs(&corpus, 3, seed).unwrap() {
                seen.insert(e.id.clone());
            }
        }
        assert_eq!(seen.len(), corpus.len());
    }

    #[test]
    fn lookup_is_verbatim() {
        let corpus = FaqCorpus::bundled();
        for e in sample_faqs(&corpus, 5, 3).unwrap() {
            let answer = lookup_answer(&corpus, &e.id).unwrap();
            let raw = serde_json::to_string(answer).unwrap();
            assert!(BUNDLED_CORPUS.contains(&raw[1..raw.len() - 1]));
        }
        let bn = corpus
            .entries()
            .iter()
            .find(|e| e.language == FaqLanguage::Bengali)
            .unwrap();
        assert_eq!(lookup_answer(&corpus, &bn.id).unwrap().as_bytes(), bn.answer.as_bytes());
        assert_eq!(
            lookup_answer(&corpus, &"nope".into()),
            Err(CorpusError::UnknownId("nope".into()))
        );
    }
}
