use rustc_hash::FxHashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::WindowScorer;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sub_seed, Rng};
use crate::sequence::{FeatureVector, Permutation};
use crate::training::LengthRanker;

/// Longest sequence [`exhaustive_rank`] accepts.
pub const MAX_EXHAUSTIVE_LEN: usize = 9;

/// Random draws spent looking for an unvisited restart before giving up.
const RESTART_DRAWS: usize = 1000;

/// Starting point of the first search tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// Sort by the pairwise (length 2) ranker's projection.
    #[default]
    RankSvm,
    Identity,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub num_trees: usize,
    /// Depth limit of each tree; the sequence length when unset.
    pub max_depth: Option<usize>,
    pub initializer: Initializer,
    /// Seed of the restart stream.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            num_trees: 5,
            max_depth: None,
            initializer: Initializer::RankSvm,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::InvalidConfig("num_trees must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub nodes_visited: usize,
    pub depth_reached: usize,
    pub restarts_used: usize,
    /// Orderings scored by each tree.
    pub tree_nodes: Vec<usize>,
    pub best_score: f64,
    /// Scores of the accepted parents of the last tree, root first.
    #[serde(skip)]
    pub path: Vec<f64>,
}

/// Orderings already scored during one ranking call.
///
/// Orderings are packed into a `u128` key whenever they fit.
#[derive(Debug, Clone)]
pub struct VisitedSet {
    len: usize,
    bits: u32,
    packed: FxHashSet<u128>,
    full: FxHashSet<Vec<usize>>,
}

impl VisitedSet {
    pub fn new(len: usize) -> Self {
        let bits = usize::BITS - len.saturating_sub(1).leading_zeros();
        Self {
            len,
            bits: bits.max(1),
            packed: FxHashSet::default(),
            full: FxHashSet::default(),
        }
    }

    fn key(&self, order: &[usize]) -> Option<u128> {
        if self.bits as usize * self.len > 128 {
            return None;
        }
        Some(
            order
                .iter()
                .fold(0u128, |acc, &i| (acc << self.bits) | i as u128),
        )
    }

    pub fn contains(&self, order: &[usize]) -> bool {
        debug_assert_eq!(order.len(), self.len);
        match self.key(order) {
            Some(k) => self.packed.contains(&k),
            None => self.full.contains(order),
        }
    }

    /// Returns `true` if `order` was not present.
    pub fn insert(&mut self, order: &[usize]) -> bool {
        debug_assert_eq!(order.len(), self.len);
        match self.key(order) {
            Some(k) => self.packed.insert(k),
            None => self.full.insert(order.to_vec()),
        }
    }

    pub fn len(&self) -> usize {
        self.packed.len() + self.full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every ordering one transposition away from `perm`, in `(a, b)` order with `a < b`.
pub fn pairswap_neighbors(perm: &Permutation) -> Vec<Permutation> {
    let n = perm.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            out.push(perm.swapped(a, b));
        }
    }
    out
}

/// One greedy permutation tree.
///
/// Scores all unvisited single-swap children of the current parent and moves
/// to the best one only if it strictly beats the parent. Stops on no
/// improvement or after `max_depth` moves. Every scored ordering is added to
/// `visited`.
pub fn greedy_search<F>(
    mut scorer: F,
    init: &Permutation,
    visited: &mut VisitedSet,
    max_depth: usize,
) -> (Permutation, f64, SearchTrace)
where
    F: FnMut(&[usize]) -> f64,
{
    let n = init.len();
    let mut current = init.as_slice().to_vec();
    let mut current_score = scorer(&current);
    visited.insert(&current);
    let mut trace = SearchTrace {
        nodes_visited: 1,
        depth_reached: 0,
        restarts_used: 1,
        tree_nodes: Vec::new(),
        best_score: current_score,
        path: vec![current_score],
    };

    while trace.depth_reached < max_depth {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            for b in a + 1..n {
                current.swap(a, b);
                if visited.insert(&current) {
                    let s = scorer(&current);
                    trace.nodes_visited += 1;
                    // first child wins exact ties
                    if best.is_none_or(|(_, _, bs)| s > bs) {
                        best = Some((a, b, s));
                    }
                }
                current.swap(a, b);
            }
        }
        match best {
            Some((a, b, s)) if s > current_score => {
                current.swap(a, b);
                current_score = s;
                trace.depth_reached += 1;
                trace.path.push(s);
            }
            _ => break,
        }
    }
    trace.best_score = current_score;
    trace.tree_nodes = vec![trace.nodes_visited];
    (
        Permutation::from_vec_unchecked(current),
        current_score,
        trace,
    )
}

/// Sort items by descending projection on the pairwise ranker's direction,
/// ties in index order.
pub fn ranksvm_init(items: &[FeatureVector], pair_ranker: &LengthRanker) -> Result<Permutation> {
    if pair_ranker.lambda != 2 {
        return Err(Error::InvalidConfig(format!(
            "initializer needs a length 2 ranker, got length {}",
            pair_ranker.lambda
        )));
    }
    if let Some(v) = items.iter().find(|v| v.dim() != pair_ranker.dim) {
        return Err(Error::DimensionMismatch {
            expected: pair_ranker.dim,
            found: v.dim(),
        });
    }
    // theta . psi(a, b) = w0 . a + w1 . b, so a precedes b iff (w0 - w1) . (a - b) > 0
    let w = pair_ranker.position_weights();
    let direction: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
    let scores: Vec<f64> = items.iter().map(|x| x.dot(&direction)).collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    Permutation::new(order)
}

fn random_unvisited(len: usize, visited: &VisitedSet, rng: &mut Rng) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    for _ in 0..RESTART_DRAWS {
        order.shuffle(rng);
        if !visited.contains(&order) {
            return Some(order);
        }
    }
    None
}

/// Best ordering found by `num_trees` greedy trees sharing one visited set.
///
/// The first tree starts from the configured initializer, later ones from
/// uniformly drawn unvisited orderings. `pair_ranker` is required for the
/// RankSVM initializer unless `ranker` itself has length 2.
pub fn rank(
    items: &[FeatureVector],
    ranker: &LengthRanker,
    config: &SearchConfig,
    pair_ranker: Option<&LengthRanker>,
) -> Result<(Permutation, SearchTrace)> {
    config.validate()?;
    let scorer = WindowScorer::new(items, ranker)?;
    let n = items.len();
    let mut rng = rng_from_seed(sub_seed(config.seed, "restarts"));
    let init = match config.initializer {
        Initializer::RankSvm => {
            let pair = match pair_ranker {
                Some(p) => p,
                None if ranker.lambda == 2 => ranker,
                None => return Err(Error::MissingPairRanker),
            };
            ranksvm_init(items, pair)?
        }
        Initializer::Identity => Permutation::identity(n)?,
        Initializer::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            Permutation::from_vec_unchecked(order)
        }
    };
    let max_depth = config.max_depth.unwrap_or(n);
    let mut visited = VisitedSet::new(n);
    let score = |order: &[usize]| scorer.score(order);

    let (mut best, mut best_score, mut trace) =
        greedy_search(score, &init, &mut visited, max_depth);
    for _ in 1..config.num_trees {
        let Some(start) = random_unvisited(n, &visited, &mut rng) else {
            break;
        };
        let start = Permutation::from_vec_unchecked(start);
        let (perm, s, t) = greedy_search(score, &start, &mut visited, max_depth);
        trace.nodes_visited += t.nodes_visited;
        trace.depth_reached = trace.depth_reached.max(t.depth_reached);
        trace.restarts_used += 1;
        trace.tree_nodes.push(t.nodes_visited);
        trace.path = t.path;
        if s > best_score {
            best = perm;
            best_score = s;
        }
    }
    trace.best_score = best_score;
    Ok((best, trace))
}

/// Rearrange `order` into the next lexicographic permutation; `false` at the last one.
fn next_permutation(order: &mut [usize]) -> bool {
    let n = order.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && order[i - 1] >= order[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while order[j] <= order[i - 1] {
        j -= 1;
    }
    order.swap(i - 1, j);
    order[i..].reverse();
    true
}

/// Maximum of `scorer` over all orderings of `0..len`, lexicographically
/// smallest on ties.
pub fn exhaustive_search<F>(len: usize, mut scorer: F) -> Result<(Permutation, f64)>
where
    F: FnMut(&[usize]) -> f64,
{
    if len > MAX_EXHAUSTIVE_LEN {
        return Err(Error::SequenceTooLongForExhaustive(len));
    }
    let mut order: Vec<usize> = (0..len).collect();
    let mut best = order.clone();
    let mut best_score = scorer(&order);
    while next_permutation(&mut order) {
        let s = scorer(&order);
        if s > best_score {
            best_score = s;
            best.copy_from_slice(&order);
        }
    }
    Ok((Permutation::new(best)?, best_score))
}

pub fn exhaustive_rank(
    items: &[FeatureVector],
    ranker: &LengthRanker,
) -> Result<(Permutation, f64)> {
    if items.len() > MAX_EXHAUSTIVE_LEN {
        return Err(Error::SequenceTooLongForExhaustive(items.len()));
    }
    let scorer = WindowScorer::new(items, ranker)?;
    exhaustive_search(items.len(), |o| scorer.score(o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMapKind;
    use crate::inference::score_sequence;
    use crate::metrics::kendall_tau;
    use rand::Rng as _;
    use std::collections::{BTreeSet, HashMap};

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..n).collect();
        let mut out = vec![order.clone()];
        while next_permutation(&mut order) {
            out.push(order.clone());
        }
        out
    }

    #[test]
    fn lexicographic_enumeration() {
        let perms = all_perms(4);
        assert_eq!(perms.len(), 24);
        assert!(perms.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn neighbor_examples() {
        assert_eq!(pairswap_neighbors(&perm(&[0, 1, 2, 3, 4])).len(), 10);
        assert_eq!(pairswap_neighbors(&perm(&[0, 1])), vec![perm(&[1, 0])]);
        let got: BTreeSet<_> = pairswap_neighbors(&perm(&[0, 1, 2])).into_iter().collect();
        let want: BTreeSet<_> = [perm(&[1, 0, 2]), perm(&[2, 1, 0]), perm(&[0, 2, 1])]
            .into_iter()
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn neighbors_are_exactly_the_transpositions() {
        // brute force: a neighbor differs from its parent in exactly two positions
        for n in 2..=6 {
            for p in all_perms(n) {
                let parent = perm(&p);
                let got: BTreeSet<Vec<usize>> = pairswap_neighbors(&parent)
                    .into_iter()
                    .map(|q| q.into_inner())
                    .collect();
                let want: BTreeSet<Vec<usize>> = all_perms(n)
                    .into_iter()
                    .filter(|q| q.iter().zip(&p).filter(|(a, b)| a != b).count() == 2)
                    .collect();
                assert_eq!(got.len(), n * (n - 1) / 2);
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn optimal_start_stays_put() {
        let target = perm(&[2, 0, 3, 1]);
        let scorer = |o: &[usize]| kendall_tau(&perm(o), &target).unwrap();
        let mut visited = VisitedSet::new(4);
        let (best, score, trace) = greedy_search(scorer, &target, &mut visited, 4);
        assert_eq!(best, target);
        assert_eq!(score, 1.0);
        assert_eq!(trace.depth_reached, 0);
        assert_eq!(trace.nodes_visited, 1 + 6);
    }

    #[test]
    fn random_tables_never_beat_the_reachable_maximum() {
        let mut rng = rng_from_seed(5);
        for _ in 0..200 {
            let table: HashMap<Vec<usize>, f64> = all_perms(4)
                .into_iter()
                .map(|p| (p, rng.random::<f64>()))
                .collect();
            let mut seen = Vec::new();
            let scorer = |o: &[usize]| {
                seen.push(o.to_vec());
                table[o]
            };
            let start: Vec<usize> = all_perms(4)[rng.random_range(0..24)].clone();
            let mut visited = VisitedSet::new(4);
            let (best, score, trace) = greedy_search(scorer, &perm(&start), &mut visited, 4);
            let reachable_max = seen.iter().map(|p| table[p]).fold(f64::MIN, f64::max);
            let global_max = table.values().copied().fold(f64::MIN, f64::max);
            assert_eq!(score, table[best.as_slice()]);
            assert!(score <= reachable_max && score <= global_max);
            assert!(trace.path.windows(2).all(|w| w[1] > w[0]));
            assert_eq!(seen.len(), trace.nodes_visited);
        }
    }

    #[test]
    fn monotone_path_reaches_the_depth_limit() {
        // score = number of adjacent transpositions applied along a fixed chain
        // [0..n) -> swap(0,1) -> swap(1,2) -> ...; every chain step is the
        // unique best child, so the tree walks n steps
        let n = 5;
        let mut chain = vec![(0..n).collect::<Vec<usize>>()];
        for k in 0..n {
            let mut next = chain.last().unwrap().clone();
            next.swap(k % (n - 1), k % (n - 1) + 1);
            chain.push(next);
        }
        let rank_of: HashMap<Vec<usize>, f64> = chain
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as f64 + 1.0))
            .collect();
        let scorer = |o: &[usize]| rank_of.get(o).copied().unwrap_or(0.0);
        let mut visited = VisitedSet::new(n);
        let (best, _, trace) = greedy_search(scorer, &perm(&chain[0]), &mut visited, n);
        assert_eq!(trace.depth_reached, n);
        assert_eq!(best.as_slice(), chain[n].as_slice());
    }

    #[test]
    fn ranksvm_init_examples() {
        let items = [fv(&[3.0]), fv(&[1.0]), fv(&[2.0])];
        let make =
            |t: f64| LengthRanker::new(2, fv(&[t]), FeatureMapKind::MeanPairwiseDiff, 1).unwrap();
        assert_eq!(ranksvm_init(&items, &make(1.0)).unwrap(), perm(&[0, 2, 1]));
        assert_eq!(ranksvm_init(&items, &make(0.0)).unwrap(), perm(&[0, 1, 2]));
        assert_eq!(ranksvm_init(&items, &make(-1.0)).unwrap(), perm(&[1, 2, 0]));
        let wide = [fv(&[3.0, 0.0]), fv(&[1.0, 0.0])];
        assert!(matches!(
            ranksvm_init(&wide, &make(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ranksvm_init_for_stacked_maps() {
        // stacked theta = [w0; w1] prefers a before b iff (w0 - w1) . (a - b) > 0
        let ranker = LengthRanker::new(2, fv(&[2.0, -1.0]), FeatureMapKind::Stacked, 1).unwrap();
        let items = [fv(&[1.0]), fv(&[5.0]), fv(&[3.0])];
        assert_eq!(ranksvm_init(&items, &ranker).unwrap(), perm(&[1, 2, 0]));
    }

    fn toy_ranker(lambda: usize, seed: u64) -> (Vec<FeatureVector>, LengthRanker) {
        let mut rng = rng_from_seed(seed);
        let dim = 3;
        let kind = FeatureMapKind::StackedDiff;
        let theta: Vec<f64> = (0..kind.output_dim(lambda, dim))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let items = (0..6)
            .map(|_| {
                fv(&(0..dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect::<Vec<f64>>())
            })
            .collect();
        (
            items,
            LengthRanker::new(lambda, fv(&theta), kind, dim).unwrap(),
        )
    }

    #[test]
    fn exhaustive_examples() {
        let r = LengthRanker::new(2, fv(&[1.0]), FeatureMapKind::MeanPairwiseDiff, 1).unwrap();
        let items = [fv(&[1.0]), fv(&[3.0]), fv(&[2.0])];
        assert_eq!(exhaustive_rank(&items, &r).unwrap().0, perm(&[1, 2, 0]));
        let pair = [fv(&[1.0]), fv(&[3.0])];
        let (best, score) = exhaustive_rank(&pair, &r).unwrap();
        assert_eq!(best, perm(&[1, 0]));
        assert!((score - 2f64.sqrt()).abs() < 1e-12);
        let long: Vec<_> = (0..10).map(|i| fv(&[i as f64])).collect();
        assert_eq!(
            exhaustive_rank(&long, &r),
            Err(Error::SequenceTooLongForExhaustive(10))
        );
    }

    #[test]
    fn exhaustive_ties_pick_the_smallest_order() {
        let (best, score) = exhaustive_search(4, |_| 1.0).unwrap();
        assert_eq!(best, perm(&[0, 1, 2, 3]));
        assert_eq!(score, 1.0);
        let (best, _) = exhaustive_search(3, |o| if o[0] == 2 { 5.0 } else { 0.0 }).unwrap();
        assert_eq!(best, perm(&[2, 0, 1]));
    }

    #[test]
    fn rank_from_the_optimum_returns_it() {
        let (items, ranker) = toy_ranker(3, 1);
        let (opt, opt_score) = exhaustive_rank(&items, &ranker).unwrap();
        let scorer = WindowScorer::new(&items, &ranker).unwrap();
        let mut visited = VisitedSet::new(items.len());
        let (best, score, _) = greedy_search(|o| scorer.score(o), &opt, &mut visited, items.len());
        assert_eq!(best, opt);
        assert_eq!(score, opt_score);
    }

    #[test]
    fn rank_checks() {
        let (items, ranker) = toy_ranker(3, 2);
        let config = SearchConfig::default();
        assert_eq!(
            rank(&items, &ranker, &config, None).unwrap_err(),
            Error::MissingPairRanker
        );
        let short = &items[..2];
        let config = SearchConfig {
            initializer: Initializer::Identity,
            ..Default::default()
        };
        assert_eq!(
            rank(short, &ranker, &config, None).unwrap_err(),
            Error::LambdaExceedsLength { lambda: 3, len: 2 }
        );
        let zero = SearchConfig {
            num_trees: 0,
            ..config
        };
        assert!(rank(&items, &ranker, &zero, None).is_err());
    }

    #[test]
    fn rank_never_beats_exhaustive_and_respects_node_bound() {
        for seed in 0..40 {
            let (items, ranker) = toy_ranker(2 + (seed as usize % 4), seed);
            let n = items.len();
            for initializer in [Initializer::Identity, Initializer::Random] {
                let config = SearchConfig {
                    num_trees: 3,
                    initializer,
                    seed,
                    ..Default::default()
                };
                let (best, trace) = rank(&items, &ranker, &config, None).unwrap();
                let (_, opt) = exhaustive_rank(&items, &ranker).unwrap();
                let direct = score_sequence(&items, &best, &ranker).unwrap();
                assert!((direct - trace.best_score).abs() < 1e-9);
                assert!(trace.best_score <= opt);
                let bound = trace.restarts_used * n * n * (n - 1) / 2 + trace.restarts_used;
                assert!(trace.nodes_visited <= bound);
            }
        }
    }

    #[test]
    fn restarts_never_rescore() {
        let (items, ranker) = toy_ranker(3, 9);
        let scorer = WindowScorer::new(&items, &ranker).unwrap();
        let mut visited = VisitedSet::new(items.len());
        let mut rng = rng_from_seed(4);
        let mut scored: Vec<Vec<usize>> = Vec::new();
        let mut count = |o: &[usize]| {
            scored.push(o.to_vec());
            scorer.score(o)
        };
        let init = Permutation::identity(items.len()).unwrap();
        greedy_search(&mut count, &init, &mut visited, items.len());
        for _ in 0..4 {
            let start = random_unvisited(items.len(), &visited, &mut rng).unwrap();
            greedy_search(&mut count, &perm(&start), &mut visited, items.len());
        }
        let unique: BTreeSet<_> = scored.iter().cloned().collect();
        assert_eq!(unique.len(), scored.len());
        assert_eq!(visited.len(), scored.len());
    }

    #[test]
    fn tiny_sequences_run_out_of_restarts() {
        let r = LengthRanker::new(2, fv(&[1.0]), FeatureMapKind::MeanPairwiseDiff, 1).unwrap();
        let items = [fv(&[1.0]), fv(&[3.0])];
        let config = SearchConfig {
            num_trees: 5,
            ..Default::default()
        };
        let (best, trace) = rank(&items, &r, &config, None).unwrap();
        assert_eq!(best, perm(&[1, 0]));
        assert_eq!(trace.nodes_visited, 2);
        assert!(trace.restarts_used <= 2);
    }

    #[test]
    fn visited_set_handles_long_orders() {
        let n = 40;
        let mut set = VisitedSet::new(n);
        let a: Vec<usize> = (0..n).collect();
        let b: Vec<usize> = (0..n).rev().collect();
        assert!(set.insert(&a));
        assert!(!set.insert(&a));
        assert!(!set.contains(&b));
        assert!(set.insert(&b));
        assert_eq!(set.len(), 2);
    }
}
