use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use midrank::data::{
    generate_synthetic, random_direction, save_dataset, Dataset, Split, SyntheticConfig,
};
use midrank::rng::sub_seed;

use super::config::{resolve_seed, section};
use super::{to_pretty, CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub dim: usize,
    pub train_sequences: usize,
    pub train_length: usize,
    pub test_sequences: usize,
    pub test_length: usize,
    pub noise_sigma: f64,
    pub seed: Option<u64>,
    pub train_out: PathBuf,
    pub test_out: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dim: 10,
            train_sequences: 200,
            train_length: 8,
            test_sequences: 500,
            test_length: 8,
            noise_sigma: 0.1,
            seed: None,
            train_out: "train.jsonl".into(),
            test_out: "test.jsonl".into(),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_name = "N")]
    train_sequences: Option<usize>,
    #[arg(long, value_name = "L")]
    train_length: Option<usize>,
    #[arg(long, value_name = "N")]
    test_sequences: Option<usize>,
    #[arg(long, value_name = "L")]
    test_length: Option<usize>,
    /// Standard deviation of the noise on the sort key.
    #[arg(long, value_name = "SIGMA", allow_negative_numbers = true)]
    noise_sigma: Option<f64>,
    /// Root seed; falls back to the config file, then MIDRANK_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    train_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    test_out: Option<PathBuf>,
}

fn settings(args: Args, file: &toml::Table) -> CliResult<Settings> {
    let mut s: Settings = section(file, "generate")?;
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { s.$f = v; })* };
    }
    take!(
        dim,
        train_sequences,
        train_length,
        test_sequences,
        test_length,
        noise_sigma,
        train_out,
        test_out
    );
    s.seed = Some(resolve_seed(args.seed, s.seed)?);
    if s.train_sequences == 0 || s.test_sequences == 0 {
        return Err(Failure::usage("sequence counts must be positive"));
    }
    Ok(s)
}

fn dataset(
    s: &Settings,
    seed: u64,
    split: Split,
    count: usize,
    len: usize,
    direction: &[f64],
) -> CliResult<Dataset> {
    let stream = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let config = SyntheticConfig {
        dim: s.dim,
        num_sequences: count,
        seq_len: len,
        latent_direction: direction.to_vec(),
        noise_sigma: s.noise_sigma,
        seed: sub_seed(seed, stream),
    };
    config.validate().map_err(Failure::usage)?;
    let mut data = generate_synthetic(&config)?;
    data.split = split;
    data.provenance = Some(serde_json::to_string(s).map_err(Failure::data)?);
    Ok(data)
}

pub fn run(args: Args, file: &toml::Table) -> CliResult<()> {
    let s = settings(args, file)?;
    let seed = s.seed.expect("resolved");
    if s.dim == 0 {
        return Err(Failure::usage("dim must be positive"));
    }
    let direction = random_direction(s.dim, sub_seed(seed, "direction"));
    let train = dataset(
        &s,
        seed,
        Split::Train,
        s.train_sequences,
        s.train_length,
        &direction,
    )?;
    let test = dataset(
        &s,
        seed,
        Split::Test,
        s.test_sequences,
        s.test_length,
        &direction,
    )?;
    save_dataset(&train, &s.train_out)?;
    save_dataset(&test, &s.test_out)?;
    let summary = json!({
        "config": s,
        "train": {"path": s.train_out, "sequences": train.sequences.len(), "items": train.num_items()},
        "test": {"path": s.test_out, "sequences": test.sequences.len(), "items": test.num_items()},
    });
    print!("{}", to_pretty(&summary)?);
    Ok(())
}
