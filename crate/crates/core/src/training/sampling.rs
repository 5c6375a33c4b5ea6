//! Positive and negative subsequence sampling.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::features::{psi, FeatureMapKind};
use crate::rng::rng_from_seed;
use crate::sequence::{consecutive_subsequences, FeatureVector, Label, Sequence, Subsequence};

/// Extra draws allowed when a scramble repeats one already produced for an
/// identical positive window.
const DEDUP_RETRIES: usize = 10;

/// A mapped subsequence ready for the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub x: FeatureVector,
    pub label: Label,
    /// Upper bound of the sample's dual variable, `|delta|`. Always 1 under
    /// the zero-one loss.
    pub weight: f64,
}

impl TrainingSample {
    pub fn new(x: FeatureVector, label: Label) -> Self {
        Self {
            x,
            label,
            weight: 1.0,
        }
    }

    pub fn y(&self) -> f64 {
        self.label.sign()
    }
}

/// Draw `count` positive windows from every sequence.
///
/// Windows are consecutive runs of the ground-truth ordered sequence. They
/// are drawn without replacement while enough exist and with replacement
/// otherwise.
pub fn sample_positives(
    seqs: &[Sequence],
    lambda: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Subsequence>> {
    if lambda < 2 {
        return Err(Error::LambdaTooSmall(lambda));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(seqs.len() * count);
    for seq in seqs {
        if seq.len() < lambda {
            return Err(Error::SequenceTooShort {
                id: seq.id().to_string(),
                len: seq.len(),
                lambda,
            });
        }
        let ordered = seq.ordered_items()?;
        let windows = consecutive_subsequences(seq.len(), lambda)?;
        let starts: Vec<usize> = if count <= windows.len() {
            index::sample(&mut rng, windows.len(), count).into_vec()
        } else {
            (0..count)
                .map(|_| rng.random_range(0..windows.len()))
                .collect()
        };
        for start in starts {
            let window = &windows[start];
            out.push(Subsequence {
                parent_id: seq.id().to_string(),
                start: window.start,
                vectors: ordered[window.clone()]
                    .iter()
                    .map(|v| (*v).clone())
                    .collect(),
                label: Label::Positive,
            });
        }
    }
    Ok(out)
}

/// Uniform draw from the `lambda! - 1` non-identity orders of `0..lambda`.
pub(crate) fn random_scramble(lambda: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lambda).collect();
    loop {
        order.shuffle(rng);
        if order.iter().enumerate().any(|(i, &v)| i != v) {
            return order;
        }
    }
}

/// One scrambled negative for every positive.
pub fn generate_negatives(positives: &[Subsequence], seed: u64) -> Result<Vec<Subsequence>> {
    let mut rng = rng_from_seed(seed);
    // scrambles already issued per (parent, start)
    let mut issued: HashMap<(&str, usize), Vec<Vec<usize>>> = HashMap::new();
    let mut out = Vec::with_capacity(positives.len());
    for pos in positives {
        let lambda = pos.lambda();
        if lambda < 2 {
            return Err(Error::LambdaTooSmall(lambda));
        }
        if pos.label != Label::Positive {
            return Err(Error::InvalidConfig(format!(
                "subsequence {}@{} is not a positive",
                pos.parent_id, pos.start
            )));
        }
        let seen = issued
            .entry((pos.parent_id.as_str(), pos.start))
            .or_default();
        let mut order = random_scramble(lambda, &mut rng);
        for _ in 0..DEDUP_RETRIES {
            if !seen.contains(&order) {
                break;
            }
            order = random_scramble(lambda, &mut rng);
        }
        let vectors = order.iter().map(|&i| pos.vectors[i].clone()).collect();
        seen.push(order);
        out.push(Subsequence {
            parent_id: pos.parent_id.clone(),
            start: pos.start,
            vectors,
            label: Label::Negative,
        });
    }
    Ok(out)
}

/// Map subsequences through `kind`.
pub fn to_samples(subseqs: &[Subsequence], kind: FeatureMapKind) -> Result<Vec<TrainingSample>> {
    subseqs
        .iter()
        .map(|s| Ok(TrainingSample::new(psi(&s.vectors, kind)?, s.label)))
        .collect()
}
