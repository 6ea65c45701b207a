//! Runs a query set through the pipeline and records what retrieval saw and
//! what was answered, ready for `evaluate_retrieval` and annotation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::retrieval::{JudgmentRecord, RetrievalRun, RunRecord};
use super::{lang_code, EvalError};
use crate::language::LanguageTag;
use crate::pipeline::{AnswerSource, ChatResponse, Pipeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRecord {
    pub query_id: String,
    pub query: String,
    #[serde(with = "lang_code")]
    pub language: LanguageTag,
    /// Stage timings are cleared so that repeated runs compare equal.
    pub response: ChatResponse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEndRun {
    pub run: RetrievalRun,
    pub responses: Vec<ResponseRecord>,
}

impl EndToEndRun {
    pub fn responses_jsonl(&self) -> String {
        super::to_jsonl(&self.responses)
    }
}

/// Answers every query, possibly in parallel, keeping input order in the output.
pub fn run_end_to_end_eval(queries: &[JudgmentRecord], pipeline: &Pipeline) -> Result<EndToEndRun, EvalError> {
    let traces = queries
        .par_iter()
        .map(|q| {
            pipeline
                .answer_query_traced(&q.query)
                .map_err(|source| EvalError::Pipeline {
                    query_id: q.query_id.clone(),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::with_capacity(queries.len());
    let mut responses = Vec::with_capacity(queries.len());
    for (q, t) in queries.iter().zip(traces) {
        records.push(RunRecord {
            query_id: q.query_id.clone(),
            before: t.retrieved.iter().map(|h| h.faq_id.clone()).collect(),
            after: t.reranked.iter().map(|h| h.faq_id.clone()).collect(),
            cache_answered: t.response.source == AnswerSource::Cache,
        });
        responses.push(ResponseRecord {
            query_id: q.query_id.clone(),
            query: q.query.clone(),
            language: q.language,
            response: t.response.without_timings(),
        });
    }
    Ok(EndToEndRun {
        run: RetrievalRun::new(records)?,
        responses,
    })
}
