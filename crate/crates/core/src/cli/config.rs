//! Config file tables, seed resolution and shared option types.

use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use midrank::fusion::{Ensemble, FusionStrategy};
use midrank::inference::{Initializer, SearchConfig};

use super::{CliResult, Failure};

pub const SEED_ENV: &str = "MIDRANK_SEED";

pub fn load(path: Option<&Path>) -> CliResult<toml::Table> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// The table `name` of the config file, or defaults when absent.
pub fn section<T: DeserializeOwned + Default>(file: &toml::Table, name: &str) -> CliResult<T> {
    match file.get(name) {
        None => Ok(T::default()),
        Some(value) => value
            .clone()
            .try_into()
            .map_err(|e| Failure::usage(format!("[{name}]: {e}"))),
    }
}

/// Flag, then config file, then the environment, then zero.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> CliResult<u64> {
    if let Some(seed) = flag.or(file) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{SEED_ENV}={text:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// `"3..8"`, `"3..=8"` or `"2,3,5"`.
pub fn parse_lambdas(text: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid length list {text:?}");
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

pub fn parse_floats(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| format!("invalid number {t:?}"))
        })
        .collect()
}

/// A fusion strategy whose best-single length may come from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FusionChoice {
    Fixed(FusionStrategy),
    BestSingleFromModel,
}

impl FromStr for FusionChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "best-single" {
            return Ok(Self::BestSingleFromModel);
        }
        s.parse()
            .map(Self::Fixed)
            .map_err(|e: midrank::Error| e.to_string())
    }
}

impl TryFrom<String> for FusionChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<FusionChoice> for String {
    fn from(c: FusionChoice) -> String {
        match c {
            FusionChoice::Fixed(s) => s.to_string(),
            FusionChoice::BestSingleFromModel => "best-single".into(),
        }
    }
}

impl Default for FusionChoice {
    fn default() -> Self {
        Self::Fixed(FusionStrategy::WeightedMajorityVote)
    }
}

impl FusionChoice {
    pub fn resolve(self, ensemble: &Ensemble) -> CliResult<FusionStrategy> {
        match self {
            Self::Fixed(s) => Ok(s),
            Self::BestSingleFromModel => ensemble
                .best_single()
                .map(FusionStrategy::BestSingle)
                .ok_or_else(|| {
                    Failure::usage("the model records no best single length; pass best-single:N")
                }),
        }
    }
}

/// Search options shared by every command that runs inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub num_trees: usize,
    pub max_depth: Option<usize>,
    pub initializer: Initializer,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            num_trees: d.num_trees,
            max_depth: d.max_depth,
            initializer: d.initializer,
        }
    }
}

#[derive(clap::Args, Debug, Default)]
pub struct SearchArgs {
    /// Greedy search trees per ranker.
    #[arg(long = "trees", value_name = "N")]
    pub num_trees: Option<usize>,
    /// Depth limit of each tree; the sequence length when unset.
    #[arg(long, value_name = "N")]
    pub max_depth: Option<usize>,
    /// First tree's starting order: rank-svm, identity or random.
    #[arg(long, value_parser = parse_initializer)]
    pub initializer: Option<Initializer>,
}

fn parse_initializer(s: &str) -> Result<Initializer, String> {
    match s {
        "rank-svm" | "rank_svm" | "ranksvm" => Ok(Initializer::RankSvm),
        "identity" => Ok(Initializer::Identity),
        "random" => Ok(Initializer::Random),
        _ => Err(format!("unknown initializer {s:?}")),
    }
}

impl SearchSettings {
    pub fn apply(&mut self, args: &SearchArgs) {
        if let Some(n) = args.num_trees {
            self.num_trees = n;
        }
        if args.max_depth.is_some() {
            self.max_depth = args.max_depth;
        }
        if let Some(i) = args.initializer {
            self.initializer = i;
        }
    }

    pub fn config(&self, seed: u64) -> CliResult<SearchConfig> {
        let config = SearchConfig {
            num_trees: self.num_trees,
            max_depth: self.max_depth,
            initializer: self.initializer,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn check_model(&self, ensemble: &Ensemble) -> CliResult<()> {
        if self.initializer == Initializer::RankSvm && ensemble.pair_ranker().is_none() {
            return Err(Failure::usage(
                "the model has no length 2 ranker to initialize the search; use --initializer identity or random",
            ));
        }
        Ok(())
    }
}
