//! Rank metrics over a single query, returned as exact fractions.

use std::collections::BTreeSet;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("recall is undefined for an empty relevant set")]
    EmptyRelevantSet,
}

pub type Score = Ratio<u64>;

fn hits_in_prefix<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> u64 {
    let prefix: BTreeSet<&T> = ranked.iter().take(k).collect();
    prefix.into_iter().filter(|id| relevant.contains(*id)).count() as u64
}

/// Relevant ids in the top `k`, divided by `k` even when fewer were ranked.
pub fn precision_at_k<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> Result<Score, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    Ok(Ratio::new(hits_in_prefix(ranked, relevant, k), k as u64))
}

pub fn recall_at_k<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> Result<Score, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if relevant.is_empty() {
        return Err(MetricError::EmptyRelevantSet);
    }
    Ok(Ratio::new(hits_in_prefix(ranked, relevant, k), relevant.len() as u64))
}

/// Reciprocal rank of the first relevant id in the top `k`; 0 if none.
pub fn mrr_at_k<T: Ord>(ranked: &[T], relevant: &BTreeSet<T>, k: usize) -> Result<Score, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    Ok(ranked
        .iter()
        .take(k)
        .position(|id| relevant.contains(id))
        .map_or(Ratio::from_integer(0), |p| Ratio::new(1, p as u64 + 1)))
}
