//! Per-length ranker training.
//!
//! For every subsequence length `lambda`, positives are consecutive windows of
//! ground-truth ordered training sequences, negatives are scrambles of them,
//! and a linear max-margin classifier separates the two under the zero-one
//! sequence loss.

mod sampling;
pub mod sdca;

use std::collections::{BTreeMap, HashMap};

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use sampling::{generate_negatives, sample_positives, to_samples, TrainingSample};
pub use sdca::{SdcaConfig, SdcaReport};

use crate::error::{Error, Result};
use crate::features::{position_weights, psi, FeatureMapKind};
use crate::fusion::{Ensemble, FusionStrategy};
use crate::rng::{rng_from_seed, sub_seed};
use crate::sequence::{FeatureVector, Sequence};

/// Default regularization grid swept by cross-validation.
pub const DEFAULT_MU_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_range: Vec<usize>,
    pub positives_per_sequence: usize,
    pub mu: f64,
    /// Per-length regularization, overriding `mu`.
    pub mu_per_lambda: BTreeMap<usize, f64>,
    pub sdca_epochs: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub feature_map: FeatureMapKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_range: (2..=8).collect(),
            positives_per_sequence: 5,
            mu: 1e-2,
            mu_per_lambda: BTreeMap::new(),
            sdca_epochs: 200,
            tolerance: 1e-3,
            seed: 0,
            feature_map: FeatureMapKind::StackedDiff,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_range.is_empty() {
            return Err(Error::EmptyLambdaRange);
        }
        if let Some(&l) = self.lambda_range.iter().find(|&&l| l < 2) {
            return Err(Error::LambdaTooSmall(l));
        }
        let mus = std::iter::once(&self.mu).chain(self.mu_per_lambda.values());
        if let Some(mu) = mus.into_iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "mu must be positive, got {mu}"
            )));
        }
        if self.positives_per_sequence == 0 {
            return Err(Error::InvalidConfig(
                "positives_per_sequence must be positive".into(),
            ));
        }
        if self.sdca_epochs == 0 {
            return Err(Error::InvalidConfig("sdca_epochs must be positive".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn mu_for(&self, lambda: usize) -> f64 {
        self.mu_per_lambda.get(&lambda).copied().unwrap_or(self.mu)
    }

    /// Root of the random streams used for length `lambda`.
    pub fn lambda_seed(&self, lambda: usize) -> u64 {
        self.seed.wrapping_add(lambda as u64)
    }

    fn sdca(&self, lambda: usize, mu: f64) -> SdcaConfig {
        SdcaConfig {
            mu,
            max_epochs: self.sdca_epochs,
            tolerance: self.tolerance,
            seed: sub_seed(self.lambda_seed(lambda), "sdca"),
        }
    }
}

/// A linear scorer of ordered subsequences of one fixed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRanker {
    pub lambda: usize,
    pub theta: FeatureVector,
    pub feature_map: FeatureMapKind,
    /// Dimension of the input items.
    pub dim: usize,
}

impl LengthRanker {
    pub fn new(
        lambda: usize,
        theta: FeatureVector,
        feature_map: FeatureMapKind,
        dim: usize,
    ) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::LambdaTooSmall(lambda));
        }
        let expected = feature_map.output_dim(lambda, dim);
        if theta.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: theta.dim(),
            });
        }
        Ok(Self {
            lambda,
            theta,
            feature_map,
            dim,
        })
    }

    /// `theta . psi(vectors)` for one ordered window.
    pub fn response<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Result<f64> {
        if vectors.len() != self.lambda {
            return Err(Error::LengthMismatch(vectors.len(), self.lambda));
        }
        if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.as_ref().len(),
            });
        }
        Ok(psi(vectors, self.feature_map)?.dot(self.theta.as_slice()))
    }

    /// Per-position weights, see [`position_weights`].
    pub fn position_weights(&self) -> Vec<Vec<f64>> {
        position_weights(
            self.feature_map,
            self.lambda,
            self.dim,
            self.theta.as_slice(),
        )
        .expect("ranker dimensions are validated on construction")
    }
}

/// Diagnostics of one per-length fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub lambda: usize,
    pub mu: f64,
    pub samples: usize,
    pub train_error: f64,
    pub sdca: SdcaReport,
}

/// Fraction of samples on the wrong side of the decision boundary.
pub fn zero_one_error(samples: &[TrainingSample], theta: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let wrong = samples
        .iter()
        .filter(|s| s.y() * s.x.dot(theta) <= 0.0)
        .count();
    wrong as f64 / samples.len() as f64
}

fn input_dim(samples: &[TrainingSample], kind: FeatureMapKind, lambda: usize) -> Result<usize> {
    let mapped = samples.first().ok_or(Error::DegenerateData)?.x.dim();
    let per_item = kind.output_dim(lambda, 1);
    if per_item == 0 || mapped % per_item != 0 {
        return Err(Error::DimensionMismatch {
            expected: per_item,
            found: mapped,
        });
    }
    Ok(mapped / per_item)
}

/// Fit one ranker and return the solver diagnostics with it.
pub fn fit_length_ranker(
    samples: &[TrainingSample],
    config: &TrainConfig,
    lambda: usize,
) -> Result<(LengthRanker, LengthReport)> {
    if lambda < 2 {
        return Err(Error::LambdaTooSmall(lambda));
    }
    let mu = config.mu_for(lambda);
    let (theta, sdca) = sdca::solve(samples, &config.sdca(lambda, mu))?;
    let dim = input_dim(samples, config.feature_map, lambda)?;
    let train_error = zero_one_error(samples, &theta);
    let ranker = LengthRanker::new(lambda, FeatureVector::new(theta)?, config.feature_map, dim)?;
    let report = LengthReport {
        lambda,
        mu,
        samples: samples.len(),
        train_error,
        sdca,
    };
    Ok((ranker, report))
}

pub fn train_length_ranker(
    samples: &[TrainingSample],
    config: &TrainConfig,
    lambda: usize,
) -> Result<LengthRanker> {
    fit_length_ranker(samples, config, lambda).map(|(r, _)| r)
}

/// Positives and an equal number of negatives for one length, mapped and
/// tagged with the id of the sequence they came from.
pub fn build_samples(
    seqs: &[Sequence],
    config: &TrainConfig,
    lambda: usize,
) -> Result<Vec<(String, TrainingSample)>> {
    let usable: Vec<Sequence> = seqs
        .iter()
        .filter(|s| {
            let keep = s.len() >= lambda;
            if !keep {
                warn!(
                    "skipping sequence {} ({} items) for length {lambda}",
                    s.id(),
                    s.len()
                );
            }
            keep
        })
        .cloned()
        .collect();
    if usable.is_empty() {
        let shortest = seqs.iter().min_by_key(|s| s.len());
        return Err(match shortest {
            Some(s) => Error::SequenceTooShort {
                id: s.id().to_string(),
                len: s.len(),
                lambda,
            },
            None => Error::DegenerateData,
        });
    }
    let root = config.lambda_seed(lambda);
    let positives = sample_positives(
        &usable,
        lambda,
        config.positives_per_sequence,
        sub_seed(root, "sampling"),
    )?;
    let negatives = generate_negatives(&positives, sub_seed(root, "scrambling"))?;
    positives
        .iter()
        .chain(&negatives)
        .map(|s| {
            let x = psi(&s.vectors, config.feature_map)?;
            Ok((s.parent_id.clone(), TrainingSample::new(x, s.label)))
        })
        .collect()
}

/// Train one ranker per length, in parallel over lengths.
pub fn train_ensemble_with_reports(
    seqs: &[Sequence],
    config: &TrainConfig,
) -> Result<(Ensemble, Vec<LengthReport>)> {
    config.validate()?;
    let mut lambdas = config.lambda_range.clone();
    lambdas.sort_unstable();
    lambdas.dedup();
    let fitted: Vec<(LengthRanker, LengthReport)> = lambdas
        .par_iter()
        .map(|&lambda| {
            let samples: Vec<TrainingSample> = build_samples(seqs, config, lambda)?
                .into_iter()
                .map(|(_, s)| s)
                .collect();
            fit_length_ranker(&samples, config, lambda)
        })
        .collect::<Result<_>>()?;
    let (rankers, reports): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let ensemble = Ensemble::new(rankers, FusionStrategy::WeightedMajorityVote)?;
    Ok((ensemble, reports))
}

pub fn train_ensemble(seqs: &[Sequence], config: &TrainConfig) -> Result<Ensemble> {
    train_ensemble_with_reports(seqs, config).map(|(e, _)| e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub mu: f64,
    pub train_error: f64,
    pub val_error: f64,
    pub val_hinge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub lambda: usize,
    pub folds: usize,
    pub best_mu: f64,
    pub entries: Vec<CvEntry>,
}

/// Pick `mu` for one length by k-fold cross-validation over sequences.
///
/// Folds split by parent sequence so no held-out window shares items with a
/// training window. The winner has the lowest validation zero-one error, then
/// the lowest mean validation hinge loss.
pub fn cross_validate_mu(
    seqs: &[Sequence],
    config: &TrainConfig,
    lambda: usize,
    grid: &[f64],
    folds: usize,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty mu grid".into()));
    }
    if folds < 2 || folds > seqs.len() {
        return Err(Error::InvalidConfig(format!(
            "need 2 <= folds <= {} sequences, got {folds}",
            seqs.len()
        )));
    }
    let tagged = build_samples(seqs, config, lambda)?;
    let mut ids: Vec<&str> = seqs.iter().map(|s| s.id()).collect();
    ids.shuffle(&mut rng_from_seed(sub_seed(
        config.lambda_seed(lambda),
        "folds",
    )));
    let fold_of: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i % folds))
        .collect();

    let split: Vec<(Vec<TrainingSample>, Vec<TrainingSample>)> = (0..folds)
        .map(|k| {
            let (held, kept): (Vec<_>, Vec<_>) =
                tagged.iter().partition(|(id, _)| fold_of[id.as_str()] == k);
            let strip =
                |v: Vec<&(String, TrainingSample)>| v.into_iter().map(|(_, s)| s.clone()).collect();
            (strip(kept), strip(held))
        })
        .collect();

    let entries: Vec<CvEntry> = grid
        .par_iter()
        .map(|&mu| {
            let mut cfg = config.clone();
            cfg.mu_per_lambda.insert(lambda, mu);
            let (mut train_error, mut val_error, mut val_hinge) = (0.0, 0.0, 0.0);
            for (train, val) in &split {
                let (ranker, report) = fit_length_ranker(train, &cfg, lambda)?;
                let theta = ranker.theta.as_slice();
                train_error += report.train_error;
                val_error += zero_one_error(val, theta);
                val_hinge += val
                    .iter()
                    .map(|s| (1.0 - s.y() * s.x.dot(theta)).max(0.0))
                    .sum::<f64>()
                    / val.len().max(1) as f64;
            }
            let k = folds as f64;
            Ok(CvEntry {
                mu,
                train_error: train_error / k,
                val_error: val_error / k,
                val_hinge: val_hinge / k,
            })
        })
        .collect::<Result<_>>()?;

    let best = entries
        .iter()
        .min_by(|a, b| {
            a.val_error
                .total_cmp(&b.val_error)
                .then(a.val_hinge.total_cmp(&b.val_hinge))
        })
        .expect("grid is non-empty");
    Ok(CvReport {
        lambda,
        folds,
        best_mu: best.mu,
        entries,
    })
}
