//! Retrieval metrics, the generation rubric, and the end-to-end runner that
//! produces inputs for both.

pub mod end_to_end;
pub mod generation;
pub mod metrics;
pub mod retrieval;

use std::path::Path;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serializer};
use thiserror::Error;

use crate::language::LanguageTag;
use crate::pipeline::PipelineError;

pub use end_to_end::{run_end_to_end_eval, EndToEndRun, ResponseRecord};
pub use generation::{annotation_accuracy, score_generation, GenerationAnnotation, GenerationReport};
pub use metrics::{mrr_at_k, precision_at_k, recall_at_k, MetricError, Score};
pub use retrieval::{evaluate_retrieval, JudgmentRecord, RelevanceJudgments, RetrievalReport, RetrievalRun, RunRecord};

/// Version tag written into every report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("no judgment for query {0}")]
    MissingJudgment(String),
    #[error("query {0} appears more than once")]
    DuplicateQuery(String),
    #[error("query {0}: after-rerank list is not a subset of the before-rerank list")]
    AfterNotSubset(String),
    #[error("no annotations to score")]
    EmptyAnnotations,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("query {query_id}: {source}")]
    Pipeline {
        query_id: String,
        #[source]
        source: PipelineError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses JSON lines, skipping blank lines.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, EvalError> {
    parse_jsonl(&std::fs::read_to_string(path)?)
}

pub fn to_jsonl<T: serde::Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

/// Serde helpers for the short language codes used in evaluation files.
pub mod lang_code {
    use super::*;

    pub fn serialize<S: Serializer>(tag: &LanguageTag, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(tag.code())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<LanguageTag, D::Error> {
        let code = String::deserialize(d)?;
        LanguageTag::from_code(&code)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown language code {code:?}, expected en, bn or banglish")))
    }
}

pub(crate) fn ratio_f64(r: &Ratio<u64>) -> f64 {
    r.to_f64().expect("ratio of u64 converts")
}

pub(crate) fn serialize_ratio<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(ratio_f64(r))
}

pub(crate) fn mean(values: &[Ratio<u64>]) -> Option<Ratio<u64>> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(Ratio::from_integer(0), |acc, v| acc + v);
    Some(sum / values.len() as u64)
}

/// Renders rows as left-aligned text columns separated by two spaces.
pub(crate) fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i + 1 == cells.len() {
                out.push_str(cell);
            } else {
                out.push_str(cell);
                out.extend(std::iter::repeat_n(' ', w - cell.chars().count() + 2));
            }
        }
        out.push('\n');
        out
    };
    let mut text = line(header.to_vec());
    for row in rows {
        text.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    text
}

pub(crate) fn fmt4(r: Option<Ratio<u64>>) -> String {
    r.map_or_else(|| "-".to_owned(), |v| format!("{:.4}", ratio_f64(&v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_reports_line_numbers() {
        let err = parse_jsonl::<serde_json::Value>("{}\n\nnot json\n").unwrap_err();
        assert!(matches!(err, EvalError::Parse { line: 3, .. }));
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["a", "bbb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bbb\nxyz  1\n");
    }

    #[test]
    fn mean_of_ratios() {
        assert_eq!(mean(&[Ratio::new(1, 2), Ratio::new(1, 4)]), Some(Ratio::new(3, 8)));
        assert_eq!(mean(&[]), None);
    }
}
