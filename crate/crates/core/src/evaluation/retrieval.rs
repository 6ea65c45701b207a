//! Retrieval evaluation over a judged query set: P/R/MRR at k=5 and k=3 before
//! reranking and k=3 after, overall and per judged language.
//!
//! Queries answered from the cache and queries with no relevant FAQ are left
//! out of the means and counted separately. A query that is both is counted as
//! cache-answered.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::metrics::{mrr_at_k, precision_at_k, recall_at_k, Score};
use super::{fmt4, lang_code, mean, render_table, serialize_ratio, EvalError, REPORT_SCHEMA_VERSION};
use crate::knowledge_base::FaqId;
use crate::language::LanguageTag;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentRecord {
    pub query_id: String,
    pub query: String,
    #[serde(with = "lang_code")]
    pub language: LanguageTag,
    #[serde(default)]
    pub relevant_ids: Vec<FaqId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceJudgments {
    records: Vec<JudgmentRecord>,
    by_id: HashMap<String, usize>,
}

impl RelevanceJudgments {
    pub fn new(records: Vec<JudgmentRecord>) -> Result<Self, EvalError> {
        let mut by_id = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.query_id.clone(), i).is_some() {
                return Err(EvalError::DuplicateQuery(r.query_id.clone()));
            }
        }
        Ok(RelevanceJudgments { records, by_id })
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        Self::new(super::parse_jsonl(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, EvalError> {
        Self::new(super::read_jsonl(path)?)
    }

    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }

    pub fn get(&self, query_id: &str) -> Option<&JudgmentRecord> {
        self.by_id.get(query_id).map(|&i| &self.records[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub query_id: String,
    pub before: Vec<FaqId>,
    pub after: Vec<FaqId>,
    #[serde(default)]
    pub cache_answered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RetrievalRun {
    pub records: Vec<RunRecord>,
}

impl RetrievalRun {
    pub fn new(records: Vec<RunRecord>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.query_id.as_str()) {
                return Err(EvalError::DuplicateQuery(r.query_id.clone()));
            }
            let before: HashSet<_> = r.before.iter().collect();
            if !r.after.iter().all(|id| before.contains(id)) {
                return Err(EvalError::AfterNotSubset(r.query_id.clone()));
            }
        }
        Ok(RetrievalRun { records })
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        Self::new(super::parse_jsonl(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, EvalError> {
        Self::new(super::read_jsonl(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        super::to_jsonl(&self.records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricSet {
    #[serde(serialize_with = "serialize_ratio")]
    pub precision: Score,
    #[serde(serialize_with = "serialize_ratio")]
    pub recall: Score,
    #[serde(serialize_with = "serialize_ratio")]
    pub mrr: Score,
}

/// Means over the included queries of one slice; `None` when it has none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SliceReport {
    pub queries: usize,
    pub before_at_5: Option<MetricSet>,
    pub before_at_3: Option<MetricSet>,
    pub after_at_3: Option<MetricSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Exclusions {
    pub no_relevant_context: usize,
    pub cache_answered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LanguageSlice {
    #[serde(with = "lang_code")]
    pub language: LanguageTag,
    #[serde(flatten)]
    pub report: SliceReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetrievalReport {
    pub schema_version: u32,
    pub total_queries: usize,
    pub excluded: Exclusions,
    pub overall: SliceReport,
    pub per_language: Vec<LanguageSlice>,
}

struct QueryScores {
    language: LanguageTag,
    before_at_5: MetricSet,
    before_at_3: MetricSet,
    after_at_3: MetricSet,
}

fn metric_set(ranked: &[FaqId], relevant: &BTreeSet<FaqId>, k: usize) -> Result<MetricSet, EvalError> {
    Ok(MetricSet {
        precision: precision_at_k(ranked, relevant, k)?,
        recall: recall_at_k(ranked, relevant, k)?,
        mrr: mrr_at_k(ranked, relevant, k)?,
    })
}

fn mean_set<'a>(sets: impl Iterator<Item = &'a MetricSet> + Clone) -> Option<MetricSet> {
    let col = |f: fn(&MetricSet) -> Score| mean(&sets.clone().map(f).collect::<Vec<_>>());
    Some(MetricSet {
        precision: col(|m| m.precision)?,
        recall: col(|m| m.recall)?,
        mrr: col(|m| m.mrr)?,
    })
}

fn slice<'a>(scores: impl Iterator<Item = &'a QueryScores> + Clone) -> SliceReport {
    SliceReport {
        queries: scores.clone().count(),
        before_at_5: mean_set(scores.clone().map(|s| &s.before_at_5)),
        before_at_3: mean_set(scores.clone().map(|s| &s.before_at_3)),
        after_at_3: mean_set(scores.map(|s| &s.after_at_3)),
    }
}

pub fn evaluate_retrieval(run: &RetrievalRun, judgments: &RelevanceJudgments) -> Result<RetrievalReport, EvalError> {
    let mut excluded = Exclusions::default();
    let mut scores = Vec::new();
    let mut languages = HashSet::new();
    for record in &run.records {
        let judgment = judgments
            .get(&record.query_id)
            .ok_or_else(|| EvalError::MissingJudgment(record.query_id.clone()))?;
        languages.insert(judgment.language);
        if record.cache_answered {
            excluded.cache_answered += 1;
            continue;
        }
        if judgment.relevant_ids.is_empty() {
            excluded.no_relevant_context += 1;
            continue;
        }
        let relevant: BTreeSet<FaqId> = judgment.relevant_ids.iter().cloned().collect();
        scores.push(QueryScores {
            language: judgment.language,
            before_at_5: metric_set(&record.before, &relevant, 5)?,
            before_at_3: metric_set(&record.before, &relevant, 3)?,
            after_at_3: metric_set(&record.after, &relevant, 3)?,
        });
    }
    let per_language = LanguageTag::ALL
        .into_iter()
        .filter(|l| languages.contains(l))
        .map(|language| LanguageSlice {
            language,
            report: slice(scores.iter().filter(move |s| s.language == language)),
        })
        .collect();
    Ok(RetrievalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        total_queries: run.records.len(),
        excluded,
        overall: slice(scores.iter()),
        per_language,
    })
}

impl RetrievalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn render_text(&self) -> String {
        let mut rows = Vec::new();
        let mut push = |name: &str, s: &SliceReport| {
            let stages = [
                ("before rerank", 5, s.before_at_5),
                ("before rerank", 3, s.before_at_3),
                ("after rerank", 3, s.after_at_3),
            ];
            for (stage, k, m) in stages {
                rows.push(vec![
                    name.to_owned(),
                    s.queries.to_string(),
                    stage.to_owned(),
                    k.to_string(),
                    fmt4(m.map(|m| m.precision)),
                    fmt4(m.map(|m| m.recall)),
                    fmt4(m.map(|m| m.mrr)),
                ]);
            }
        };
        push("overall", &self.overall);
        for l in &self.per_language {
            push(l.language.code(), &l.report);
        }
        let evaluated = self.overall.queries;
        format!(
            "retrieval: {evaluated} of {} queries evaluated; excluded {} without relevant context, {} answered from cache\n\n{}",
            self.total_queries,
            self.excluded.no_relevant_context,
            self.excluded.cache_answered,
            render_table(&["slice", "queries", "stage", "k", "precision", "recall", "mrr"], &rows)
        )
    }
}

impl MetricSet {
    pub fn zero() -> Self {
        MetricSet {
            precision: Ratio::from_integer(0),
            recall: Ratio::from_integer(0),
            mrr: Ratio::from_integer(0),
        }
    }
}
