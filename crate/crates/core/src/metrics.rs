//! Ranking quality metrics.
//!
//! All metrics compare a predicted ordering with the ground-truth ordering of
//! the same items. For NDCG the item the truth places at 1-based rank `r`
//! has relevance `len - r`, and the cutoff is the full length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Permutation;

fn check(pred: &Permutation, truth: &Permutation) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    Ok(())
}

/// Concordant and discordant pair counts.
pub fn pair_counts(pred: &Permutation, truth: &Permutation) -> Result<(usize, usize)> {
    check(pred, truth)?;
    let truth_pos = truth.inverse();
    let ranks: Vec<usize> = pred
        .as_slice()
        .iter()
        .map(|&i| truth_pos.as_slice()[i])
        .collect();
    let mut concordant = 0;
    let mut discordant = 0;
    for a in 0..ranks.len() {
        for b in a + 1..ranks.len() {
            if ranks[a] < ranks[b] {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    Ok((concordant, discordant))
}

/// `(concordant - discordant) / (len (len - 1) / 2)`.
pub fn kendall_tau(pred: &Permutation, truth: &Permutation) -> Result<f64> {
    let (c, d) = pair_counts(pred, truth)?;
    Ok((c as f64 - d as f64) / (c + d) as f64)
}

/// Percentage of correctly ordered pairs.
pub fn pair_accuracy(pred: &Permutation, truth: &Permutation) -> Result<f64> {
    let (c, d) = pair_counts(pred, truth)?;
    Ok(100.0 * c as f64 / (c + d) as f64)
}

/// Relevance grade of every item.
pub fn relevance(truth: &Permutation) -> Vec<f64> {
    let n = truth.len();
    let mut rel = vec![0.0; n];
    for (rank0, &item) in truth.as_slice().iter().enumerate() {
        rel[item] = (n - 1 - rank0) as f64;
    }
    rel
}

/// `sum_i (2^rel_i - 1) / log2(i + 1)` over 1-based positions.
pub fn dcg(order: &[usize], rel: &[f64]) -> f64 {
    order
        .iter()
        .enumerate()
        .map(|(i, &item)| (rel[item].exp2() - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

pub fn ndcg(pred: &Permutation, truth: &Permutation) -> Result<f64> {
    check(pred, truth)?;
    let rel = relevance(truth);
    let ideal = dcg(truth.as_slice(), &rel);
    Ok(dcg(pred.as_slice(), &rel) / ideal)
}

/// `+1` when the orderings are identical, `-1` otherwise.
pub fn delta_zero_one(pred: &Permutation, truth: &Permutation) -> Result<f64> {
    check(pred, truth)?;
    Ok(if pred == truth { 1.0 } else { -1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub ndcg: f64,
    pub kendall_tau: f64,
    pub pair_accuracy: f64,
    pub sequence_exact: bool,
}

impl RankingReport {
    pub fn compute(pred: &Permutation, truth: &Permutation) -> Result<Self> {
        Ok(Self {
            ndcg: ndcg(pred, truth)?,
            kendall_tau: kendall_tau(pred, truth)?,
            pair_accuracy: pair_accuracy(pred, truth)?,
            sequence_exact: pred == truth,
        })
    }
}

/// Unweighted mean of per-sequence reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub method: String,
    pub ndcg: f64,
    pub kt: f64,
    pub pair_acc: f64,
    pub exact: f64,
    pub n_sequences: usize,
}

impl AggregateReport {
    pub fn from_reports(method: impl Into<String>, reports: &[RankingReport]) -> Self {
        let n = reports.len();
        let mean = |f: &dyn Fn(&RankingReport) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                reports.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            method: method.into(),
            ndcg: mean(&|r| r.ndcg),
            kt: mean(&|r| r.kendall_tau),
            pair_acc: mean(&|r| r.pair_accuracy),
            exact: mean(&|r| if r.sequence_exact { 1.0 } else { 0.0 }),
            n_sequences: n,
        }
    }
}
