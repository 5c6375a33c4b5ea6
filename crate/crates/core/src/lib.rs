//! Learning to rank from subsequences.
//!
//! A ranker is trained for each subsequence length `lambda` to tell correctly
//! ordered windows of `lambda` items from scrambled ones. A new sequence is
//! ordered by searching for the permutation whose consecutive windows score
//! highest under a ranker, and the orderings proposed by rankers of several
//! lengths are merged by weighted position voting.
//!
//! ```no_run
//! use midrank::prelude::*;
//!
//! let cfg = SyntheticConfig {
//!     dim: 8,
//!     num_sequences: 100,
//!     seq_len: 8,
//!     latent_direction: random_direction(8, 1),
//!     noise_sigma: 0.1,
//!     seed: 2,
//! };
//! let train = generate_synthetic(&cfg)?;
//! let ensemble = train_ensemble(&train.sequences, &TrainConfig::default())?;
//! let items = train.sequences[0].items();
//! let (order, _) = ensemble.rank_sequence(items, &SearchConfig::default())?;
//! # Ok::<(), midrank::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod features;
pub mod fusion;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sequence;
pub mod training;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::data::{
        generate_synthetic, load_dataset, random_direction, sample_test_sequences, save_dataset,
        Dataset, Split, SyntheticConfig,
    };
    pub use crate::error::{Error, Result};
    pub use crate::features::{psi, FeatureMapKind};
    pub use crate::fusion::{Ensemble, FusionStrategy, RankerOutcome};
    pub use crate::inference::{
        exhaustive_rank, rank, score_sequence, Initializer, SearchConfig, SearchTrace,
    };
    pub use crate::metrics::{kendall_tau, ndcg, pair_accuracy, AggregateReport, RankingReport};
    pub use crate::sequence::{FeatureVector, Permutation, Sequence};
    pub use crate::training::{train_ensemble, LengthRanker, TrainConfig};
}
