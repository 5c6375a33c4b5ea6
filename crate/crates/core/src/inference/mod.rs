//! Sequence scoring and arg-max search over orderings.
//!
//! The score of an ordering sums, over every window of `lambda` consecutive
//! positions, the signed square root of the ranker response on that window.

mod search;

pub use search::{
    exhaustive_rank, exhaustive_search, greedy_search, pairswap_neighbors, rank, ranksvm_init,
    Initializer, SearchConfig, SearchTrace, VisitedSet, MAX_EXHAUSTIVE_LEN,
};

use crate::error::{Error, Result};
use crate::sequence::{dot, FeatureVector, Permutation};
use crate::training::LengthRanker;

/// `sign(s) * |s|^(1/2)`.
#[inline]
pub fn signed_sqrt(s: f64) -> f64 {
    s.signum() * s.abs().sqrt()
}

fn check_items(items: &[FeatureVector], ranker: &LengthRanker) -> Result<()> {
    if ranker.lambda > items.len() {
        return Err(Error::LambdaExceedsLength {
            lambda: ranker.lambda,
            len: items.len(),
        });
    }
    if let Some(v) = items.iter().find(|v| v.dim() != ranker.dim) {
        return Err(Error::DimensionMismatch {
            expected: ranker.dim,
            found: v.dim(),
        });
    }
    Ok(())
}

/// Score of `perm` computed window by window through the feature map.
pub fn score_sequence(
    items: &[FeatureVector],
    perm: &Permutation,
    ranker: &LengthRanker,
) -> Result<f64> {
    check_items(items, ranker)?;
    if perm.len() != items.len() {
        return Err(Error::LengthMismatch(perm.len(), items.len()));
    }
    let ordered: Vec<&FeatureVector> = perm.as_slice().iter().map(|&i| &items[i]).collect();
    ordered
        .windows(ranker.lambda)
        .map(|w| ranker.response(w).map(signed_sqrt))
        .sum()
}

/// Scores orderings of one fixed item set under one ranker.
///
/// Projects every item onto the ranker's per-position weights once, so a
/// window response is `lambda` table lookups.
#[derive(Debug, Clone)]
pub struct WindowScorer {
    lambda: usize,
    len: usize,
    /// `table[k * len + item]` is the contribution of `item` at window offset `k`.
    table: Vec<f64>,
}

impl WindowScorer {
    pub fn new(items: &[FeatureVector], ranker: &LengthRanker) -> Result<Self> {
        check_items(items, ranker)?;
        let len = items.len();
        let weights = ranker.position_weights();
        let mut table = Vec::with_capacity(ranker.lambda * len);
        for w in &weights {
            table.extend(items.iter().map(|x| dot(w, x.as_slice())));
        }
        Ok(Self {
            lambda: ranker.lambda,
            len,
            table,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Raw response of each window, before the square-root transform.
    pub fn window_responses(&self, order: &[usize]) -> Vec<f64> {
        order
            .windows(self.lambda)
            .map(|w| {
                w.iter()
                    .enumerate()
                    .map(|(k, &item)| self.table[k * self.len + item])
                    .sum()
            })
            .collect()
    }

    /// Score of an ordering given as a slice of item indices.
    pub fn score(&self, order: &[usize]) -> f64 {
        debug_assert_eq!(order.len(), self.len);
        let mut total = 0.0;
        for start in 0..=self.len - self.lambda {
            let mut s = 0.0;
            for k in 0..self.lambda {
                s += self.table[k * self.len + order[start + k]];
            }
            total += signed_sqrt(s);
        }
        total
    }
}
