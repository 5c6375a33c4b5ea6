use std::collections::HashSet;
use std::path::PathBuf;

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use midrank::data::load_dataset;
use midrank::features::FeatureMapKind;
use midrank::fusion::{select_best_single, Ensemble};
use midrank::model::save_model;
use midrank::rng::{rng_from_seed, sub_seed};
use midrank::sequence::Sequence;
use midrank::training::{
    cross_validate_mu, train_ensemble_with_reports, CvReport, TrainConfig, DEFAULT_MU_GRID,
};

use super::config::{
    parse_floats, parse_lambdas, resolve_seed, section, FusionChoice, SearchArgs, SearchSettings,
};
use super::{to_pretty, write_file, CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub data: PathBuf,
    pub model_out: PathBuf,
    pub report_out: PathBuf,
    pub lambda_range: Vec<usize>,
    pub positives_per_sequence: usize,
    /// Fixed regularization; cross-validation over `mu_grid` when unset.
    pub mu: Option<f64>,
    pub mu_grid: Vec<f64>,
    pub folds: usize,
    pub sdca_epochs: usize,
    pub tolerance: f64,
    pub feature_map: FeatureMapKind,
    pub fusion: FusionChoice,
    pub seed: Option<u64>,
    /// Read from the shared `[search]` table.
    #[serde(skip_deserializing)]
    pub search: SearchSettings,
}

impl Default for Settings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: "train.jsonl".into(),
            model_out: "model.json".into(),
            report_out: "train_report.json".into(),
            lambda_range: t.lambda_range,
            positives_per_sequence: t.positives_per_sequence,
            mu: None,
            mu_grid: DEFAULT_MU_GRID.to_vec(),
            folds: 3,
            sdca_epochs: t.sdca_epochs,
            tolerance: t.tolerance,
            feature_map: t.feature_map,
            fusion: FusionChoice::default(),
            seed: None,
            search: SearchSettings::default(),
        }
    }
}

// Aliases keep clap from treating the lists as repeated flags.
type LambdaList = Vec<usize>;
type FloatList = Vec<f64>;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Training dataset (JSONL, optionally gzipped).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    model_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    report_out: Option<PathBuf>,
    /// Subsequence lengths, e.g. `2..8` or `2,3,5`.
    #[arg(long, value_name = "LIST", value_parser = parse_lambdas)]
    lambdas: Option<LambdaList>,
    #[arg(long, value_name = "N")]
    positives_per_sequence: Option<usize>,
    /// Fixed regularization weight; disables cross-validation.
    #[arg(long)]
    mu: Option<f64>,
    /// Comma-separated regularization weights tried by cross-validation.
    #[arg(long, value_name = "LIST", value_parser = parse_floats)]
    mu_grid: Option<FloatList>,
    #[arg(long, value_name = "K")]
    folds: Option<usize>,
    #[arg(long, value_name = "N")]
    sdca_epochs: Option<usize>,
    /// Relative duality gap at which the solver stops.
    #[arg(long)]
    tolerance: Option<f64>,
    /// mean_pairwise_diff, stacked, stacked_diff or all_pairs_diff.
    #[arg(long, value_name = "KIND")]
    feature_map: Option<FeatureMapKind>,
    /// weighted, winner-takes-all, best-single or best-single:N.
    #[arg(long, value_name = "STRATEGY")]
    fusion: Option<FusionChoice>,
    /// Root seed; falls back to the config file, then MIDRANK_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    search: SearchArgs,
}

fn settings(args: Args, file: &toml::Table) -> CliResult<Settings> {
    let mut s: Settings = section(file, "train")?;
    s.search = section(file, "search")?;
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { s.$f = v; })* };
    }
    take!(
        data,
        model_out,
        report_out,
        positives_per_sequence,
        mu_grid,
        folds,
        sdca_epochs,
        tolerance,
        feature_map,
        fusion
    );
    if let Some(l) = args.lambdas {
        s.lambda_range = l;
    }
    if args.mu.is_some() {
        s.mu = args.mu;
    }
    s.search.apply(&args.search);
    s.seed = Some(resolve_seed(args.seed, s.seed)?);
    if s.mu.is_none() && s.mu_grid.is_empty() {
        return Err(Failure::usage("mu_grid is empty and no fixed mu was given"));
    }
    if s.mu.is_none() && s.folds < 2 {
        return Err(Failure::usage(
            "cross-validation needs at least 2 folds; pass --mu to skip it",
        ));
    }
    if let Some(bad) = s.mu_grid.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Failure::usage(format!(
            "mu_grid entries must be positive, got {bad}"
        )));
    }
    Ok(s)
}

#[derive(Serialize)]
struct LengthEntry {
    lambda: usize,
    mu: f64,
    samples: usize,
    train_error: f64,
    val_error: Option<f64>,
    epochs: usize,
    converged: bool,
    primal: f64,
    dual: f64,
    gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvReport>,
}

/// Held-out sequences for picking the best single length, plus the rest.
fn holdout(seqs: &[Sequence], folds: usize, seed: u64) -> (Vec<Sequence>, Vec<Sequence>) {
    let mut ids: Vec<&str> = seqs.iter().map(|s| s.id()).collect();
    ids.shuffle(&mut rng_from_seed(sub_seed(seed, "best-single")));
    let held: HashSet<&str> = ids
        .iter()
        .take(seqs.len().div_ceil(folds))
        .copied()
        .collect();
    let (a, b): (Vec<&Sequence>, Vec<&Sequence>) = seqs.iter().partition(|s| held.contains(s.id()));
    (
        a.into_iter().cloned().collect(),
        b.into_iter().cloned().collect(),
    )
}

fn pick_best_single(
    seqs: &[Sequence],
    config: &TrainConfig,
    s: &Settings,
    seed: u64,
) -> CliResult<Option<usize>> {
    if seqs.len() < 2 {
        warn!("too few sequences to pick a best single length");
        return Ok(None);
    }
    let (held, kept) = holdout(seqs, s.folds.max(2), seed);
    let search = s.search.config(sub_seed(seed, "search"))?;
    let trained = train_ensemble_with_reports(&kept, config)
        .and_then(|(ens, _)| select_best_single(&ens, &held, &search));
    match trained {
        Ok(lambda) => Ok(Some(lambda)),
        Err(e) => {
            warn!("no best single length: {e}");
            Ok(None)
        }
    }
}

pub fn run(args: Args, file: &toml::Table) -> CliResult<()> {
    let s = settings(args, file)?;
    let seed = s.seed.expect("resolved");
    let mut config = TrainConfig {
        lambda_range: s.lambda_range.clone(),
        positives_per_sequence: s.positives_per_sequence,
        mu: s.mu.unwrap_or_else(|| s.mu_grid[0]),
        sdca_epochs: s.sdca_epochs,
        tolerance: s.tolerance,
        seed,
        feature_map: s.feature_map,
        ..Default::default()
    };
    config.validate()?;
    s.search.config(0)?;
    if s.search.initializer == midrank::inference::Initializer::RankSvm
        && !s.lambda_range.contains(&2)
    {
        warn!("no length 2 ranker is trained; inference with the rank-svm initializer will fail");
    }
    let data = load_dataset(&s.data)?;
    let seqs = &data.sequences;
    if let Some(seq) = seqs.iter().find(|q| q.ground_truth().is_none()) {
        return Err(midrank::Error::MissingGroundTruth(seq.id().to_string()).into());
    }

    let mut lambdas = config.lambda_range.clone();
    lambdas.sort_unstable();
    lambdas.dedup();
    let cv: Vec<Option<CvReport>> = match s.mu {
        Some(_) => vec![None; lambdas.len()],
        None => {
            if s.folds > seqs.len() {
                return Err(Failure::usage(format!(
                    "{} folds but only {} sequences",
                    s.folds,
                    seqs.len()
                )));
            }
            lambdas
                .par_iter()
                .map(|&l| cross_validate_mu(seqs, &config, l, &s.mu_grid, s.folds).map(Some))
                .collect::<midrank::Result<_>>()?
        }
    };
    for report in cv.iter().flatten() {
        info!(
            "length {}: cross-validated mu {}",
            report.lambda, report.best_mu
        );
        config.mu_per_lambda.insert(report.lambda, report.best_mu);
    }

    let (ensemble, reports) = train_ensemble_with_reports(seqs, &config)?;
    let best_single = pick_best_single(seqs, &config, &s, seed)?;
    let mut ensemble: Ensemble = ensemble;
    if let Some(l) = best_single {
        ensemble = ensemble.with_best_single(l)?;
    }
    let fusion = s.fusion.resolve(&ensemble)?;
    let ensemble = ensemble.with_fusion(fusion)?;

    let entries: Vec<LengthEntry> = reports
        .into_iter()
        .zip(cv)
        .map(|(r, cv)| LengthEntry {
            lambda: r.lambda,
            mu: r.mu,
            samples: r.samples,
            train_error: r.train_error,
            val_error: cv
                .as_ref()
                .and_then(|c| c.entries.iter().find(|e| e.mu == c.best_mu))
                .map(|e| e.val_error),
            epochs: r.sdca.epochs,
            converged: r.sdca.converged,
            primal: r.sdca.primal,
            dual: r.sdca.dual,
            gap: r.sdca.gap,
            cv,
        })
        .collect();
    let report = json!({
        "config": s,
        "lengths": entries,
        "best_single": best_single,
        "fusion": fusion.to_string(),
    });
    save_model(&ensemble, Some(&s), &s.model_out)?;
    write_file(&s.report_out, &to_pretty(&report)?)?;
    let summary = json!({
        "config": s,
        "model": s.model_out,
        "report": s.report_out,
        "rankers": ensemble.rankers().iter().map(|r| r.lambda).collect::<Vec<_>>(),
        "best_single": best_single,
    });
    print!("{}", to_pretty(&summary)?);
    Ok(())
}
