//! Feature maps of an ordered subsequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::FeatureVector;

/// How an ordered subsequence of `lambda` vectors of dimension `d` is mapped
/// to a single vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMapKind {
    /// Mean of `x_i - x_j` over every pair where `i` precedes `j`. Dimension `d`.
    MeanPairwiseDiff,
    /// Concatenation of the vectors in order. Dimension `lambda * d`.
    Stacked,
    /// Concatenation of adjacent differences. Dimension `(lambda - 1) * d`.
    #[default]
    StackedDiff,
    /// Concatenation of the differences of every ordered pair, in
    /// lexicographic pair order. Dimension `lambda * (lambda - 1) / 2 * d`.
    /// Kept for ablations only.
    AllPairsDiff,
}

impl FeatureMapKind {
    pub const ALL: [FeatureMapKind; 4] = [
        FeatureMapKind::MeanPairwiseDiff,
        FeatureMapKind::Stacked,
        FeatureMapKind::StackedDiff,
        FeatureMapKind::AllPairsDiff,
    ];

    pub fn output_dim(self, lambda: usize, dim: usize) -> usize {
        match self {
            FeatureMapKind::MeanPairwiseDiff => dim,
            FeatureMapKind::Stacked => lambda * dim,
            FeatureMapKind::StackedDiff => lambda.saturating_sub(1) * dim,
            FeatureMapKind::AllPairsDiff => lambda * lambda.saturating_sub(1) / 2 * dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMapKind::MeanPairwiseDiff => "mean_pairwise_diff",
            FeatureMapKind::Stacked => "stacked",
            FeatureMapKind::StackedDiff => "stacked_diff",
            FeatureMapKind::AllPairsDiff => "all_pairs_diff",
        }
    }
}

impl fmt::Display for FeatureMapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMapKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown feature map {s:?}")))
    }
}

fn check_inputs<V: AsRef<[f64]>>(vectors: &[V]) -> Result<usize> {
    if vectors.len() < 2 {
        return Err(Error::TooShort(vectors.len()));
    }
    let dim = vectors[0].as_ref().len();
    for v in vectors {
        if v.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.as_ref().len(),
            });
        }
    }
    Ok(dim)
}

/// Map an ordered list of vectors to its feature representation.
///
/// Outputs are not re-normalized.
pub fn psi<V: AsRef<[f64]>>(vectors: &[V], kind: FeatureMapKind) -> Result<FeatureVector> {
    let dim = check_inputs(vectors)?;
    let lambda = vectors.len();
    let mut out = Vec::with_capacity(kind.output_dim(lambda, dim));
    match kind {
        FeatureMapKind::MeanPairwiseDiff => {
            out.resize(dim, 0.0);
            for i in 0..lambda {
                for j in i + 1..lambda {
                    let (a, b) = (vectors[i].as_ref(), vectors[j].as_ref());
                    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
                        *o += x - y;
                    }
                }
            }
            let pairs = (lambda * (lambda - 1) / 2) as f64;
            out.iter_mut().for_each(|o| *o /= pairs);
        }
        FeatureMapKind::Stacked => {
            for v in vectors {
                out.extend_from_slice(v.as_ref());
            }
        }
        FeatureMapKind::StackedDiff => {
            for w in vectors.windows(2) {
                let (a, b) = (w[0].as_ref(), w[1].as_ref());
                out.extend(a.iter().zip(b).map(|(x, y)| x - y));
            }
        }
        FeatureMapKind::AllPairsDiff => {
            for i in 0..lambda {
                for j in i + 1..lambda {
                    let (a, b) = (vectors[i].as_ref(), vectors[j].as_ref());
                    out.extend(a.iter().zip(b).map(|(x, y)| x - y));
                }
            }
        }
    }
    FeatureVector::new(out)
}

/// Per-position weight vectors `w_k` such that
/// `theta . psi(x_0, ..., x_{lambda-1}) == sum_k w_k . x_k`.
///
/// Every map is linear in its inputs, so a window response only needs the
/// projections of each item onto these `lambda` vectors.
pub fn position_weights(
    kind: FeatureMapKind,
    lambda: usize,
    dim: usize,
    theta: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if lambda < 2 {
        return Err(Error::TooShort(lambda));
    }
    let expected = kind.output_dim(lambda, dim);
    if theta.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: theta.len(),
        });
    }
    let block = |b: usize| &theta[b * dim..(b + 1) * dim];
    let mut weights = vec![vec![0.0; dim]; lambda];
    let mut add = |k: usize, src: &[f64], scale: f64| {
        for (w, t) in weights[k].iter_mut().zip(src) {
            *w += scale * t;
        }
    };
    match kind {
        FeatureMapKind::MeanPairwiseDiff => {
            let pairs = (lambda * (lambda - 1) / 2) as f64;
            for k in 0..lambda {
                // (#items after k) - (#items before k)
                let c = (lambda - 1 - k) as f64 - k as f64;
                add(k, theta, c / pairs);
            }
        }
        FeatureMapKind::Stacked => {
            for k in 0..lambda {
                add(k, block(k), 1.0);
            }
        }
        FeatureMapKind::StackedDiff => {
            for b in 0..lambda - 1 {
                add(b, block(b), 1.0);
                add(b + 1, block(b), -1.0);
            }
        }
        FeatureMapKind::AllPairsDiff => {
            let mut b = 0;
            for i in 0..lambda {
                for j in i + 1..lambda {
                    add(i, block(b), 1.0);
                    add(j, block(b), -1.0);
                    b += 1;
                }
            }
        }
    }
    Ok(weights)
}
