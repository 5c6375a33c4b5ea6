//! Multi-length ensembles and fusion of their per-length rankings.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMapKind;
use crate::inference::{rank, SearchConfig, SearchTrace};
use crate::metrics::kendall_tau;
use crate::rng::sub_seed;
use crate::sequence::{FeatureVector, Permutation, Sequence};
use crate::training::LengthRanker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    #[default]
    WeightedMajorityVote,
    WinnerTakesAll,
    /// Use the ranker of this length alone.
    BestSingle(usize),
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionStrategy::WeightedMajorityVote => f.write_str("weighted"),
            FusionStrategy::WinnerTakesAll => f.write_str("winner-takes-all"),
            FusionStrategy::BestSingle(l) => write!(f, "best-single:{l}"),
        }
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" | "weighted-majority" | "weighted_majority_vote" => {
                Ok(Self::WeightedMajorityVote)
            }
            "winner-takes-all" | "wta" | "winner_takes_all" => Ok(Self::WinnerTakesAll),
            _ => s
                .strip_prefix("best-single:")
                .and_then(|l| l.parse().ok())
                .map(Self::BestSingle)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown fusion strategy {s:?}"))),
        }
    }
}

/// How a ranker's vote weight is derived from its ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteWeighting {
    /// Raw score, shifted by `min(0, min score)` so no weight is negative.
    #[default]
    ShiftedScore,
    Uniform,
}

/// One ranker's answer for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerOutcome {
    pub lambda: usize,
    pub permutation: Permutation,
    pub score: f64,
    pub trace: SearchTrace,
}

/// Accumulated `votes[item][position]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    len: usize,
    votes: Vec<f64>,
}

impl VoteMatrix {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            votes: vec![0.0; len * len],
        }
    }

    pub fn get(&self, item: usize, position: usize) -> f64 {
        self.votes[item * self.len + position]
    }

    pub fn add_ranking(&mut self, perm: &Permutation, weight: f64) -> Result<()> {
        if perm.len() != self.len {
            return Err(Error::LengthMismatch(perm.len(), self.len));
        }
        for (position, &item) in perm.as_slice().iter().enumerate() {
            self.votes[item * self.len + position] += weight;
        }
        Ok(())
    }

    /// Fill positions from the top, each time taking the unassigned item with
    /// the most votes for that position (lower index on ties).
    pub fn assign(&self) -> Result<Permutation> {
        let mut taken = vec![false; self.len];
        let mut order = Vec::with_capacity(self.len);
        for position in 0..self.len {
            let mut best: Option<usize> = None;
            for item in (0..self.len).filter(|&i| !taken[i]) {
                if best.is_none_or(|b| self.get(item, position) > self.get(b, position)) {
                    best = Some(item);
                }
            }
            let item = best.expect("an unassigned item remains for every position");
            taken[item] = true;
            order.push(item);
        }
        Permutation::new(order)
    }
}

fn check_rankings(outcomes: &[RankerOutcome], len: usize) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::EmptyRankings);
    }
    if let Some(o) = outcomes.iter().find(|o| o.permutation.len() != len) {
        return Err(Error::LengthMismatch(o.permutation.len(), len));
    }
    Ok(())
}

pub fn vote_weights(outcomes: &[RankerOutcome], weighting: VoteWeighting) -> Vec<f64> {
    let weights: Vec<f64> = match weighting {
        VoteWeighting::Uniform => vec![1.0; outcomes.len()],
        VoteWeighting::ShiftedScore => {
            let shift = outcomes.iter().map(|o| o.score).fold(0.0_f64, f64::min);
            outcomes.iter().map(|o| o.score - shift).collect()
        }
    };
    // all-zero weights cast no votes at all; fall back to equal votes
    if weights.iter().all(|w| *w == 0.0) {
        vec![1.0; outcomes.len()]
    } else {
        weights
    }
}

pub fn fuse_weighted_majority_with(
    outcomes: &[RankerOutcome],
    len: usize,
    weighting: VoteWeighting,
) -> Result<Permutation> {
    check_rankings(outcomes, len)?;
    let mut matrix = VoteMatrix::new(len);
    for (o, w) in outcomes.iter().zip(vote_weights(outcomes, weighting)) {
        matrix.add_ranking(&o.permutation, w)?;
    }
    matrix.assign()
}

/// Score-weighted position voting.
pub fn fuse_weighted_majority(outcomes: &[RankerOutcome], len: usize) -> Result<Permutation> {
    fuse_weighted_majority_with(outcomes, len, VoteWeighting::ShiftedScore)
}

/// Ranking of the ranker with the highest score, shorter length on ties.
pub fn fuse_winner_takes_all(outcomes: &[RankerOutcome]) -> Result<Permutation> {
    let winner = outcomes
        .iter()
        .reduce(|best, o| {
            if o.score > best.score || (o.score == best.score && o.lambda < best.lambda) {
                o
            } else {
                best
            }
        })
        .ok_or(Error::EmptyRankings)?;
    Ok(winner.permutation.clone())
}

pub fn fuse(
    outcomes: &[RankerOutcome],
    len: usize,
    strategy: FusionStrategy,
) -> Result<Permutation> {
    match strategy {
        FusionStrategy::WeightedMajorityVote => fuse_weighted_majority(outcomes, len),
        FusionStrategy::WinnerTakesAll => fuse_winner_takes_all(outcomes),
        FusionStrategy::BestSingle(lambda) => {
            check_rankings(outcomes, len)?;
            outcomes
                .iter()
                .find(|o| o.lambda == lambda)
                .map(|o| o.permutation.clone())
                .ok_or(Error::UnknownLambda(lambda))
        }
    }
}

/// Rankers of distinct lengths sharing one feature map and input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    rankers: Vec<LengthRanker>,
    pub fusion: FusionStrategy,
    /// Lengths whose rankings are fused.
    fusion_lambdas: Vec<usize>,
    /// Length picked on held-out data for [`FusionStrategy::BestSingle`].
    best_single: Option<usize>,
}

impl Ensemble {
    /// Rankers are sorted by length. Fusion covers every length >= 3 when
    /// one exists, the length 2 ranker then only seeds the search.
    pub fn new(mut rankers: Vec<LengthRanker>, fusion: FusionStrategy) -> Result<Self> {
        if rankers.is_empty() {
            return Err(Error::EmptyLambdaRange);
        }
        rankers.sort_by_key(|r| r.lambda);
        if let Some(w) = rankers.windows(2).find(|w| w[0].lambda == w[1].lambda) {
            return Err(Error::InvalidConfig(format!(
                "duplicate ranker length {}",
                w[0].lambda
            )));
        }
        let (kind, dim) = (rankers[0].feature_map, rankers[0].dim);
        if let Some(r) = rankers
            .iter()
            .find(|r| r.feature_map != kind || r.dim != dim)
        {
            return Err(Error::InvalidConfig(format!(
                "ranker of length {} uses {} on dimension {}, expected {} on {}",
                r.lambda, r.feature_map, r.dim, kind, dim
            )));
        }
        let long: Vec<usize> = rankers
            .iter()
            .map(|r| r.lambda)
            .filter(|&l| l >= 3)
            .collect();
        let fusion_lambdas = if long.is_empty() {
            rankers.iter().map(|r| r.lambda).collect()
        } else {
            long
        };
        let ensemble = Self {
            rankers,
            fusion,
            fusion_lambdas,
            best_single: None,
        };
        ensemble.check_fusion()?;
        Ok(ensemble)
    }

    fn check_fusion(&self) -> Result<()> {
        if let FusionStrategy::BestSingle(l) = self.fusion {
            self.ranker(l).ok_or(Error::UnknownLambda(l))?;
        }
        Ok(())
    }

    pub fn with_fusion(mut self, fusion: FusionStrategy) -> Result<Self> {
        self.fusion = fusion;
        self.check_fusion()?;
        Ok(self)
    }

    pub fn with_fusion_lambdas(mut self, lambdas: Vec<usize>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::EmptyLambdaRange);
        }
        if let Some(&l) = lambdas.iter().find(|&&l| self.ranker(l).is_none()) {
            return Err(Error::UnknownLambda(l));
        }
        self.fusion_lambdas = lambdas;
        self.fusion_lambdas.sort_unstable();
        self.fusion_lambdas.dedup();
        Ok(self)
    }

    pub fn with_best_single(mut self, lambda: usize) -> Result<Self> {
        self.ranker(lambda).ok_or(Error::UnknownLambda(lambda))?;
        self.best_single = Some(lambda);
        Ok(self)
    }

    pub fn best_single(&self) -> Option<usize> {
        self.best_single
    }

    pub fn rankers(&self) -> &[LengthRanker] {
        &self.rankers
    }

    pub fn fusion_lambdas(&self) -> &[usize] {
        &self.fusion_lambdas
    }

    pub fn ranker(&self, lambda: usize) -> Option<&LengthRanker> {
        self.rankers.iter().find(|r| r.lambda == lambda)
    }

    pub fn pair_ranker(&self) -> Option<&LengthRanker> {
        self.ranker(2)
    }

    pub fn feature_map(&self) -> FeatureMapKind {
        self.rankers[0].feature_map
    }

    pub fn dim(&self) -> usize {
        self.rankers[0].dim
    }

    pub fn min_lambda(&self) -> usize {
        self.rankers[0].lambda
    }

    /// Search with one ranker. The restart stream is derived per length.
    pub fn rank_with(
        &self,
        items: &[FeatureVector],
        lambda: usize,
        search: &SearchConfig,
    ) -> Result<RankerOutcome> {
        let ranker = self.ranker(lambda).ok_or(Error::UnknownLambda(lambda))?;
        let config = SearchConfig {
            seed: sub_seed(search.seed, &format!("lambda-{lambda}")),
            ..*search
        };
        let (permutation, trace) = rank(items, ranker, &config, self.pair_ranker())?;
        Ok(RankerOutcome {
            lambda,
            score: trace.best_score,
            permutation,
            trace,
        })
    }

    /// Rankings of every length that takes part in fusion or is needed by
    /// `fusion`. Rankers longer than the sequence are skipped.
    pub fn rank_all(
        &self,
        items: &[FeatureVector],
        search: &SearchConfig,
    ) -> Result<Vec<RankerOutcome>> {
        let mut lambdas = self.fusion_lambdas.clone();
        if let FusionStrategy::BestSingle(l) = self.fusion {
            if !lambdas.contains(&l) {
                lambdas.push(l);
                lambdas.sort_unstable();
            }
        }
        let shortest = lambdas[0];
        let usable: Vec<usize> = lambdas.into_iter().filter(|&l| l <= items.len()).collect();
        if usable.is_empty() {
            return Err(Error::LambdaExceedsLength {
                lambda: shortest,
                len: items.len(),
            });
        }
        usable
            .iter()
            .map(|&l| self.rank_with(items, l, search))
            .collect()
    }

    /// Final ordering of `items` under the ensemble's fusion strategy.
    pub fn rank_sequence(
        &self,
        items: &[FeatureVector],
        search: &SearchConfig,
    ) -> Result<(Permutation, Vec<RankerOutcome>)> {
        let outcomes = self.rank_all(items, search)?;
        let fusable: Vec<RankerOutcome> = outcomes
            .iter()
            .filter(|o| match self.fusion {
                FusionStrategy::BestSingle(l) => o.lambda == l,
                _ => self.fusion_lambdas.contains(&o.lambda),
            })
            .cloned()
            .collect();
        if fusable.len() < outcomes.len() {
            warn!("fusing {} of {} rankings", fusable.len(), outcomes.len());
        }
        let perm = fuse(&fusable, items.len(), self.fusion)?;
        Ok((perm, outcomes))
    }
}

/// Fused length whose ranker alone reaches the best mean Kendall-Tau on
/// held-out sequences; the shorter length wins ties.
pub fn select_best_single(
    ensemble: &Ensemble,
    validation: &[Sequence],
    search: &SearchConfig,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &lambda in ensemble.fusion_lambdas() {
        let mut total = 0.0;
        let mut count = 0usize;
        for seq in validation.iter().filter(|s| s.len() >= lambda) {
            let truth = seq
                .ground_truth()
                .ok_or_else(|| Error::MissingGroundTruth(seq.id().to_string()))?;
            let outcome = ensemble.rank_with(seq.items(), lambda, search)?;
            total += kendall_tau(&outcome.permutation, truth)?;
            count += 1;
        }
        if count == 0 {
            continue;
        }
        let mean = total / count as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((lambda, mean));
        }
    }
    best.map(|(l, _)| l).ok_or(Error::EmptyRankings)
}
