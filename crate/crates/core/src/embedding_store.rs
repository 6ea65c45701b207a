//! Embedding vectors, cosine similarity and exact in-memory similarity indexes.
//!
//! Two index kinds exist over the same corpus: one over FAQ questions only
//! (used by the semantic cache) and one over a combined question+answer text
//! (used for retrieval). Search is an exhaustive scan; ties are broken by
//! corpus file order so results are reproducible.
//!
//! Index file layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "FAQIDX01"
//! kind       u8       0 = question-only, 1 = combined question+answer
//! dim        u32
//! model_id   u16 length + UTF-8 bytes
//! checksum   u16 length + UTF-8 bytes (hex SHA-256 of the corpus file)
//! rows       u32
//! per row:   u16 length + UTF-8 faq id, 32-byte text hash, dim x f32
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::knowledge_base::{FaqCorpus, FaqEntry, FaqId};
use crate::providers::{EmbeddingProvider, ProviderError};

const MAGIC: &[u8; 8] = b"FAQIDX01";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot compute cosine similarity of an all-zero vector")]
    ZeroVector,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("embedding provider failed: {0}")]
    Provider(#[from] ProviderError),
    #[error("index was built for corpus {expected} but the loaded corpus is {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("index rows do not match the corpus entries")]
    RowMismatch,
    #[error("malformed index file: {0}")]
    Format(String),
    #[error("index io error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    model_id: String,
    text_hash: [u8; 32],
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>, model_id: impl Into<String>, text: &str) -> Result<Self, IndexError> {
        Self::with_hash(values, model_id, text_hash(text))
    }

    pub fn with_hash(
        values: Vec<f32>,
        model_id: impl Into<String>,
        text_hash: [u8; 32],
    ) -> Result<Self, IndexError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite);
        }
        Ok(EmbeddingVector {
            values,
            model_id: model_id.into(),
            text_hash,
        })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn text_hash(&self) -> &[u8; 32] {
        &self.text_hash
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

pub fn text_hash(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn cosine_with_norms(a: &[f32], a_norm: f64, b: &[f32], b_norm: f64) -> f64 {
    (dot(a, b) / (a_norm * b_norm)).clamp(-1.0, 1.0)
}

/// Cosine similarity over raw slices, clamped to [-1, 1].
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64, IndexError> {
    if a.len() != b.len() {
        return Err(IndexError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(IndexError::ZeroVector);
    }
    Ok(cosine_with_norms(a, na, b, nb))
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, IndexError> {
    cosine(a.values(), b.values())
}

/// The retrieval document for an entry: `"Q: {question}\nA: {answer}"`.
pub fn combined_document_text(entry: &FaqEntry) -> String {
    format!("Q: {}\nA: {}", entry.question, entry.answer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    QuestionOnly,
    CombinedQa,
}

impl IndexKind {
    pub fn document_text(self, entry: &FaqEntry) -> String {
        match self {
            IndexKind::QuestionOnly => entry.question.clone(),
            IndexKind::CombinedQa => combined_document_text(entry),
        }
    }

    /// Conventional file name inside an index directory.
    pub fn file_name(self) -> &'static str {
        match self {
            IndexKind::QuestionOnly => "questions.idx",
            IndexKind::CombinedQa => "combined.idx",
        }
    }

    fn tag(self) -> u8 {
        match self {
            IndexKind::QuestionOnly => 0,
            IndexKind::CombinedQa => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(IndexKind::QuestionOnly),
            1 => Some(IndexKind::CombinedQa),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct IndexRow {
    faq_id: FaqId,
    vector: EmbeddingVector,
    norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub faq_id: FaqId,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    kind: IndexKind,
    dim: usize,
    model_id: String,
    corpus_checksum: String,
    rows: Vec<IndexRow>,
}

impl EmbeddingIndex {
    /// Assembles an index from precomputed rows. Rows keep the given order, which
    /// is the tie-break order for search.
    pub fn from_rows(
        kind: IndexKind,
        model_id: impl Into<String>,
        corpus_checksum: impl Into<String>,
        rows: Vec<(FaqId, EmbeddingVector)>,
    ) -> Result<Self, IndexError> {
        let dim = rows.first().map(|(_, v)| v.dim()).ok_or(IndexError::EmptyCorpus)?;
        let rows = rows
            .into_iter()
            .map(|(faq_id, vector)| {
                if vector.dim() != dim {
                    return Err(IndexError::DimensionMismatch {
                        left: dim,
                        right: vector.dim(),
                    });
                }
                let norm = vector.norm();
                if norm == 0.0 {
                    return Err(IndexError::ZeroVector);
                }
                Ok(IndexRow { faq_id, vector, norm })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EmbeddingIndex {
            kind,
            dim,
            model_id: model_id.into(),
            corpus_checksum: corpus_checksum.into(),
            rows,
        })
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn corpus_checksum(&self) -> &str {
        &self.corpus_checksum
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &FaqId> {
        self.rows.iter().map(|r| &r.faq_id)
    }

    pub fn vector(&self, id: &FaqId) -> Option<&EmbeddingVector> {
        self.rows.iter().find(|r| &r.faq_id == id).map(|r| &r.vector)
    }

    /// Checks that this index was built from `corpus`: same checksum and one row
    /// per entry in file order.
    pub fn verify_against(&self, corpus: &FaqCorpus) -> Result<(), IndexError> {
        if self.corpus_checksum != corpus.checksum() {
            return Err(IndexError::ChecksumMismatch {
                expected: self.corpus_checksum.clone(),
                actual: corpus.checksum().to_owned(),
            });
        }
        let same = self.rows.len() == corpus.len()
            && self.rows.iter().zip(corpus.entries()).all(|(r, e)| r.faq_id == e.id);
        if !same {
            return Err(IndexError::RowMismatch);
        }
        Ok(())
    }

    /// Exact top-k by cosine similarity. Equal scores keep row order.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredHit>, IndexError> {
        if query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                left: self.dim,
                right: query.dim(),
            });
        }
        let qn = query.norm();
        if qn == 0.0 {
            return Err(IndexError::ZeroVector);
        }
        let mut scored: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, cosine_with_norms(query.values(), qn, r.vector.values(), r.norm)))
            .collect();
        // Stable sort keeps earlier rows first among equal scores.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(pos, (i, score))| ScoredHit {
                faq_id: self.rows[i].faq_id.clone(),
                score,
                rank: pos + 1,
            })
            .collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), IndexError> {
        w.write_all(MAGIC)?;
        w.write_all(&[self.kind.tag()])?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        write_str(&mut w, &self.model_id)?;
        write_str(&mut w, &self.corpus_checksum)?;
        w.write_all(&(self.rows.len() as u32).to_le_bytes())?;
        for row in &self.rows {
            write_str(&mut w, row.faq_id.as_str())?;
            w.write_all(row.vector.text_hash())?;
            for v in row.vector.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let kind = IndexKind::from_tag(read_u8(&mut r)?)
            .ok_or_else(|| IndexError::Format("unknown index kind".into()))?;
        let dim = read_u32(&mut r)? as usize;
        if dim == 0 {
            return Err(IndexError::Format("zero dimension".into()));
        }
        let model_id = read_str(&mut r)?;
        let checksum = read_str(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut rows = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let id = FaqId::new(read_str(&mut r)?);
            let mut hash = [0u8; 32];
            r.read_exact(&mut hash).map_err(truncated)?;
            let mut values = Vec::with_capacity(dim);
            let mut buf = [0u8; 4];
            for _ in 0..dim {
                r.read_exact(&mut buf).map_err(truncated)?;
                values.push(f32::from_le_bytes(buf));
            }
            rows.push((id, EmbeddingVector::with_hash(values, model_id.clone(), hash)?));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(IndexError::Format("trailing bytes".into()));
        }
        Self::from_rows(kind, model_id, checksum, rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        Self::read_from(io::BufReader::new(fs::File::open(path)?))
    }

    /// Loads an index file and checks it against the corpus it claims to cover.
    pub fn load_for(path: impl AsRef<Path>, corpus: &FaqCorpus) -> Result<Self, IndexError> {
        let index = Self::load(path)?;
        index.verify_against(corpus)?;
        Ok(index)
    }
}

fn truncated(e: io::Error) -> IndexError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        IndexError::Format("truncated file".into())
    } else {
        IndexError::Io(e)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "string longer than 65535 bytes"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8, IndexError> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, IndexError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, IndexError> {
    let mut len = [0u8; 2];
    r.read_exact(&mut len).map_err(truncated)?;
    let mut buf = vec![0u8; u16::from_le_bytes(len) as usize];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| IndexError::Format("invalid UTF-8 string".into()))
}

/// Embeds every corpus entry with `embedder`, in file order.
pub fn build_index(
    corpus: &FaqCorpus,
    embedder: &dyn EmbeddingProvider,
    kind: IndexKind,
) -> Result<EmbeddingIndex, IndexError> {
    if corpus.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let rows = corpus
        .entries()
        .iter()
        .map(|e| Ok((e.id.clone(), embedder.embed(&kind.document_text(e))?)))
        .collect::<Result<Vec<_>, IndexError>>()?;
    EmbeddingIndex::from_rows(kind, embedder.model_id(), corpus.checksum(), rows)
}
