use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use midrank::data::{load_dataset, read_dataset, Dataset};
use midrank::fusion::{fuse, Ensemble, FusionStrategy, RankerOutcome};
use midrank::inference::SearchConfig;
use midrank::model::load_model;
use midrank::rng::sub_seed;
use midrank::sequence::{Permutation, Sequence};
use midrank::Error;

use super::config::{resolve_seed, section, FusionChoice, SearchArgs, SearchSettings};
use super::{to_pretty, write_file, CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub model: PathBuf,
    /// Standard input when unset.
    pub data: Option<PathBuf>,
    /// Standard output when unset.
    pub out: Option<PathBuf>,
    /// The model's own strategy when unset.
    pub fusion: Option<FusionChoice>,
    pub all_fusions: bool,
    pub seed: Option<u64>,
    #[serde(skip_deserializing)]
    pub search: SearchSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            model: "model.json".into(),
            data: None,
            out: None,
            fusion: None,
            all_fusions: false,
            seed: None,
            search: SearchSettings::default(),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Sequences to order (JSONL); `-` or unset reads standard input.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// weighted, winner-takes-all, best-single or best-single:N.
    #[arg(long, value_name = "STRATEGY")]
    fusion: Option<FusionChoice>,
    /// Also report the ordering under every fusion strategy.
    #[arg(long)]
    all_fusions: bool,
    /// Root seed; falls back to the config file, then MIDRANK_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    search: SearchArgs,
}

fn settings(args: Args, file: &toml::Table) -> CliResult<Settings> {
    let mut s: Settings = section(file, "rank")?;
    s.search = section(file, "search")?;
    if let Some(m) = args.model {
        s.model = m;
    }
    if let Some(d) = args.data {
        s.data = (d.as_os_str() != "-").then_some(d);
    }
    if args.out.is_some() {
        s.out = args.out;
    }
    if args.fusion.is_some() {
        s.fusion = args.fusion;
    }
    s.all_fusions |= args.all_fusions;
    s.search.apply(&args.search);
    s.seed = Some(resolve_seed(args.seed, s.seed)?);
    Ok(s)
}

/// The ensemble with its fusion strategy replaced when requested.
pub fn with_fusion(ensemble: Ensemble, fusion: Option<FusionChoice>) -> CliResult<Ensemble> {
    match fusion {
        Some(choice) => {
            let strategy = choice.resolve(&ensemble)?;
            Ok(ensemble.with_fusion(strategy)?)
        }
        None => Ok(ensemble),
    }
}

/// Every strategy the model can apply, keyed by name.
pub fn strategies(ensemble: &Ensemble) -> Vec<FusionStrategy> {
    let mut all = vec![
        FusionStrategy::WeightedMajorityVote,
        FusionStrategy::WinnerTakesAll,
    ];
    if let Some(l) = ensemble.best_single() {
        all.push(FusionStrategy::BestSingle(l));
    }
    if !all.contains(&ensemble.fusion) {
        all.push(ensemble.fusion);
    }
    all
}

/// Outcomes of the rankers that `strategy` combines.
pub fn fuse_subset(
    ensemble: &Ensemble,
    outcomes: &[RankerOutcome],
    len: usize,
    strategy: FusionStrategy,
) -> midrank::Result<Permutation> {
    let picked: Vec<RankerOutcome> = outcomes
        .iter()
        .filter(|o| match strategy {
            FusionStrategy::BestSingle(l) => o.lambda == l,
            _ => ensemble.fusion_lambdas().contains(&o.lambda),
        })
        .cloned()
        .collect();
    fuse(&picked, len, strategy)
}

/// Outcomes for every length any of `strategies` needs.
pub fn outcomes_for(
    ensemble: &Ensemble,
    seq: &Sequence,
    strategies: &[FusionStrategy],
    search: &SearchConfig,
) -> midrank::Result<Vec<RankerOutcome>> {
    let mut lambdas: Vec<usize> = ensemble.fusion_lambdas().to_vec();
    for s in strategies {
        if let FusionStrategy::BestSingle(l) = s {
            lambdas.push(*l);
        }
    }
    lambdas.sort_unstable();
    lambdas.dedup();
    let shortest = lambdas[0];
    let usable: Vec<usize> = lambdas.into_iter().filter(|&l| l <= seq.len()).collect();
    if usable.is_empty() {
        return Err(Error::LambdaExceedsLength {
            lambda: shortest,
            len: seq.len(),
        });
    }
    usable
        .iter()
        .map(|&l| ensemble.rank_with(seq.items(), l, search))
        .collect()
}

fn rank_one(
    ensemble: &Ensemble,
    seq: &Sequence,
    all_fusions: bool,
    search: &SearchConfig,
) -> serde_json::Value {
    let wanted = if all_fusions {
        strategies(ensemble)
    } else {
        vec![ensemble.fusion]
    };
    let result = outcomes_for(ensemble, seq, &wanted, search).and_then(|outcomes| {
        let perm = fuse_subset(ensemble, &outcomes, seq.len(), ensemble.fusion)?;
        let mut fusions = BTreeMap::new();
        if all_fusions {
            for s in &wanted {
                fusions.insert(
                    s.to_string(),
                    fuse_subset(ensemble, &outcomes, seq.len(), *s)?,
                );
            }
        }
        Ok((perm, outcomes, fusions))
    });
    match result {
        Ok((perm, outcomes, fusions)) => {
            let mut entry = json!({
                "id": seq.id(),
                "permutation": perm,
                "fusion": ensemble.fusion.to_string(),
                "rankers": outcomes,
            });
            if all_fusions {
                entry["fusions"] = json!(fusions);
            }
            entry
        }
        Err(e) => json!({"id": seq.id(), "error": e.to_string()}),
    }
}

fn read_input(path: Option<&PathBuf>) -> CliResult<Dataset> {
    match path {
        Some(p) => Ok(load_dataset(p)?),
        None => Ok(read_dataset(BufReader::new(std::io::stdin().lock()))?),
    }
}

pub fn run(args: Args, file: &toml::Table) -> CliResult<()> {
    let s = settings(args, file)?;
    let seed = s.seed.expect("resolved");
    let search = s.search.config(sub_seed(seed, "search"))?;
    let ensemble = with_fusion(load_model(&s.model)?, s.fusion)?;
    s.search.check_model(&ensemble)?;
    let data = read_input(s.data.as_ref())?;
    if data.dim != ensemble.dim() {
        return Err(Failure::data(Error::DimensionMismatch {
            expected: ensemble.dim(),
            found: data.dim,
        }));
    }
    let results: Vec<serde_json::Value> = data
        .sequences
        .par_iter()
        .map(|seq| rank_one(&ensemble, seq, s.all_fusions, &search))
        .collect();
    let text = to_pretty(&json!({"config": s, "results": results}))?;
    match &s.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
