//! Scoring of human-annotated answers.
//!
//! Per answer: 1 when it came from the cache; for queries without relevant
//! context, 1 when the answer declined, asked for details or offered a human
//! operator, else 0; otherwise 1 if faithful to the context (0 if not), minus
//! 0.2 per piece of extra information and 0.3 per instruction deviation,
//! clamped to [0, 1]. Scores are computed in integer tenths.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{fmt4, lang_code, mean, render_table, serialize_ratio, EvalError, REPORT_SCHEMA_VERSION};
use crate::language::LanguageTag;

pub const EXTRA_INFO_PENALTY_TENTHS: i64 = 2;
pub const DEVIATION_PENALTY_TENTHS: i64 = 3;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationAnnotation {
    pub query_id: String,
    #[serde(with = "lang_code")]
    pub language: LanguageTag,
    pub lang_match: bool,
    /// False when the answer came straight from the FAQ cache.
    pub was_generated: bool,
    /// False for queries the knowledge base cannot answer.
    #[serde(default = "default_true")]
    pub has_relevant_context: bool,
    #[serde(default)]
    pub faithful_to_context: bool,
    #[serde(default)]
    pub extra_info_count: u32,
    #[serde(default)]
    pub instruction_deviation_count: u32,
    #[serde(default)]
    pub correct_no_context_behavior: bool,
}

pub fn annotation_accuracy(a: &GenerationAnnotation) -> Ratio<u64> {
    let tenths = if !a.was_generated {
        10
    } else if !a.has_relevant_context {
        if a.correct_no_context_behavior {
            10
        } else {
            0
        }
    } else {
        let base = if a.faithful_to_context { 10 } else { 0 };
        base - EXTRA_INFO_PENALTY_TENTHS * i64::from(a.extra_info_count)
            - DEVIATION_PENALTY_TENTHS * i64::from(a.instruction_deviation_count)
    };
    Ratio::new(tenths.clamp(0, 10) as u64, 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GenerationSlice {
    pub annotations: usize,
    #[serde(serialize_with = "serialize_ratio")]
    pub lang_match_rate: Ratio<u64>,
    #[serde(serialize_with = "serialize_ratio")]
    pub generation_rate: Ratio<u64>,
    #[serde(serialize_with = "serialize_ratio")]
    pub mean_accuracy: Ratio<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerationLanguageSlice {
    #[serde(with = "lang_code")]
    pub language: LanguageTag,
    #[serde(flatten)]
    pub slice: GenerationSlice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerationReport {
    pub schema_version: u32,
    /// Means over all annotations.
    pub overall: GenerationSlice,
    /// Unweighted mean of the per-language mean accuracies.
    #[serde(serialize_with = "serialize_ratio")]
    pub macro_accuracy: Ratio<u64>,
    pub per_language: Vec<GenerationLanguageSlice>,
}

fn rate(flags: impl Iterator<Item = bool>) -> Ratio<u64> {
    let (yes, all) = flags.fold((0u64, 0u64), |(y, n), f| (y + u64::from(f), n + 1));
    Ratio::new(yes, all)
}

fn slice(items: &[&GenerationAnnotation]) -> GenerationSlice {
    let scores: Vec<_> = items.iter().map(|a| annotation_accuracy(a)).collect();
    GenerationSlice {
        annotations: items.len(),
        lang_match_rate: rate(items.iter().map(|a| a.lang_match)),
        generation_rate: rate(items.iter().map(|a| a.was_generated)),
        mean_accuracy: mean(&scores).expect("slice is non-empty"),
    }
}

pub fn score_generation(annotations: &[GenerationAnnotation]) -> Result<GenerationReport, EvalError> {
    if annotations.is_empty() {
        return Err(EvalError::EmptyAnnotations);
    }
    let all: Vec<_> = annotations.iter().collect();
    let per_language: Vec<_> = LanguageTag::ALL
        .into_iter()
        .filter_map(|language| {
            let items: Vec<_> = annotations.iter().filter(|a| a.language == language).collect();
            (!items.is_empty()).then(|| GenerationLanguageSlice {
                language,
                slice: slice(&items),
            })
        })
        .collect();
    let macro_accuracy = mean(&per_language.iter().map(|l| l.slice.mean_accuracy).collect::<Vec<_>>())
        .expect("at least one language");
    Ok(GenerationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        overall: slice(&all),
        macro_accuracy,
        per_language,
    })
}

impl GenerationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn render_text(&self) -> String {
        let row = |name: &str, s: &GenerationSlice| {
            vec![
                name.to_owned(),
                s.annotations.to_string(),
                fmt4(Some(s.lang_match_rate)),
                fmt4(Some(s.generation_rate)),
                fmt4(Some(s.mean_accuracy)),
            ]
        };
        let mut rows: Vec<_> = self.per_language.iter().map(|l| row(l.language.code(), &l.slice)).collect();
        rows.push(row("overall", &self.overall));
        format!(
            "generation: {} annotated answers; macro accuracy {}\n\n{}",
            self.overall.annotations,
            fmt4(Some(self.macro_accuracy)),
            render_table(&["language", "answers", "lang_match", "gen_rate", "accuracy"], &rows)
        )
    }
}
