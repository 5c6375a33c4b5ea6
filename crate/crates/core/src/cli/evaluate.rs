use std::path::PathBuf;
use std::time::{Duration, Instant};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use midrank::data::{load_dataset, sample_test_sequences};
use midrank::fusion::{Ensemble, FusionStrategy, RankerOutcome};
use midrank::inference::{exhaustive_rank, ranksvm_init, SearchConfig, MAX_EXHAUSTIVE_LEN};
use midrank::metrics::{AggregateReport, RankingReport};
use midrank::model::load_model;
use midrank::rng::sub_seed;
use midrank::sequence::Sequence;
use midrank::Error;

use super::config::{resolve_seed, section, FusionChoice, SearchArgs, SearchSettings};
use super::rank::{fuse_subset, strategies, with_fusion};
use super::{to_pretty, write_file, CliResult, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
    /// Resample test sequences of this length from the dataset.
    pub test_length: Option<usize>,
    /// Number of resampled sequences; the dataset size when unset.
    pub test_count: Option<usize>,
    pub fusion: Option<FusionChoice>,
    pub all_fusions: bool,
    pub ablate_lambda: bool,
    pub compare_exhaustive: bool,
    pub seed: Option<u64>,
    #[serde(skip_deserializing)]
    pub search: SearchSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            model: "model.json".into(),
            data: "test.jsonl".into(),
            out: "eval_report.json".into(),
            csv: None,
            test_length: None,
            test_count: None,
            fusion: None,
            all_fusions: false,
            ablate_lambda: false,
            compare_exhaustive: false,
            seed: None,
            search: SearchSettings::default(),
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Test dataset with ground-truth orders.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// JSON report.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Metric rows as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "L")]
    test_length: Option<usize>,
    #[arg(long, value_name = "N")]
    test_count: Option<usize>,
    /// weighted, winner-takes-all, best-single or best-single:N.
    #[arg(long, value_name = "STRATEGY")]
    fusion: Option<FusionChoice>,
    /// One row per fusion strategy.
    #[arg(long)]
    all_fusions: bool,
    /// One row per subsequence length.
    #[arg(long)]
    ablate_lambda: bool,
    /// Check greedy search against exhaustive search on short sequences.
    #[arg(long)]
    compare_exhaustive: bool,
    /// Root seed; falls back to the config file, then MIDRANK_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    search: SearchArgs,
}

fn settings(args: Args, file: &toml::Table) -> CliResult<Settings> {
    let mut s: Settings = section(file, "evaluate")?;
    s.search = section(file, "search")?;
    if let Some(v) = args.model {
        s.model = v;
    }
    if let Some(v) = args.data {
        s.data = v;
    }
    if let Some(v) = args.out {
        s.out = v;
    }
    if args.csv.is_some() {
        s.csv = args.csv;
    }
    if args.test_length.is_some() {
        s.test_length = args.test_length;
    }
    if args.test_count.is_some() {
        s.test_count = args.test_count;
    }
    if args.fusion.is_some() {
        s.fusion = args.fusion;
    }
    s.all_fusions |= args.all_fusions;
    s.ablate_lambda |= args.ablate_lambda;
    s.compare_exhaustive |= args.compare_exhaustive;
    s.search.apply(&args.search);
    s.seed = Some(resolve_seed(args.seed, s.seed)?);
    if s.test_count.is_some() && s.test_length.is_none() {
        return Err(Failure::usage("test_count needs test_length"));
    }
    Ok(s)
}

enum Method {
    Baseline,
    Fused(FusionStrategy),
    Single(usize),
}

impl Method {
    fn name(&self) -> String {
        match self {
            Self::Baseline => "rank-svm".into(),
            Self::Fused(s) => s.to_string(),
            Self::Single(l) => format!("lambda-{l}"),
        }
    }
}

fn methods(ensemble: &Ensemble, s: &Settings) -> Vec<Method> {
    let mut out = Vec::new();
    if ensemble.pair_ranker().is_some() {
        out.push(Method::Baseline);
    }
    out.push(Method::Fused(ensemble.fusion));
    if s.all_fusions {
        out.extend(
            strategies(ensemble)
                .into_iter()
                .filter(|f| *f != ensemble.fusion)
                .map(Method::Fused),
        );
    }
    if s.ablate_lambda {
        out.extend(ensemble.rankers().iter().map(|r| Method::Single(r.lambda)));
    }
    out
}

fn needed_lambdas(ensemble: &Ensemble, methods: &[Method]) -> Vec<usize> {
    let mut lambdas = Vec::new();
    for m in methods {
        match m {
            Method::Baseline => {}
            Method::Fused(FusionStrategy::BestSingle(l)) | Method::Single(l) => lambdas.push(*l),
            Method::Fused(_) => lambdas.extend_from_slice(ensemble.fusion_lambdas()),
        }
    }
    lambdas.sort_unstable();
    lambdas.dedup();
    lambdas
}

/// Per-method reports for one sequence; `None` where a method cannot run.
fn evaluate_one(
    ensemble: &Ensemble,
    seq: &Sequence,
    methods: &[Method],
    lambdas: &[usize],
    search: &SearchConfig,
) -> midrank::Result<Vec<Option<RankingReport>>> {
    let truth = seq
        .ground_truth()
        .ok_or_else(|| Error::MissingGroundTruth(seq.id().to_string()))?;
    let outcomes: Vec<RankerOutcome> = lambdas
        .iter()
        .filter(|&&l| l <= seq.len())
        .map(|&l| ensemble.rank_with(seq.items(), l, search))
        .collect::<midrank::Result<_>>()?;
    methods
        .iter()
        .map(|m| {
            let perm = match m {
                Method::Baseline => Some(ranksvm_init(
                    seq.items(),
                    ensemble.pair_ranker().expect("listed only with one"),
                )?),
                Method::Single(l) => outcomes
                    .iter()
                    .find(|o| o.lambda == *l)
                    .map(|o| o.permutation.clone()),
                Method::Fused(strategy) => {
                    match fuse_subset(ensemble, &outcomes, seq.len(), *strategy) {
                        Ok(p) => Some(p),
                        Err(Error::EmptyRankings) => None,
                        Err(e) => return Err(e),
                    }
                }
            };
            perm.map(|p| RankingReport::compute(&p, truth)).transpose()
        })
        .collect()
}

#[derive(Serialize)]
struct ExhaustiveRow {
    lambda: usize,
    sequences: usize,
    agreement: f64,
    max_tree_nodes: usize,
}

struct Timing {
    greedy: Duration,
    exhaustive: Duration,
}

/// Agreement of greedy and exhaustive best scores per fused length.
fn compare_exhaustive(
    ensemble: &Ensemble,
    seqs: &[Sequence],
    search: &SearchConfig,
) -> midrank::Result<(Vec<ExhaustiveRow>, Timing)> {
    let short: Vec<&Sequence> = seqs
        .iter()
        .filter(|s| s.len() <= MAX_EXHAUSTIVE_LEN)
        .collect();
    let mut rows = Vec::new();
    let mut timing = Timing {
        greedy: Duration::ZERO,
        exhaustive: Duration::ZERO,
    };
    for &lambda in ensemble.fusion_lambdas() {
        let ranker = ensemble
            .ranker(lambda)
            .expect("fusion lengths have rankers");
        let (mut agree, mut count, mut max_nodes) = (0usize, 0usize, 0usize);
        for seq in short.iter().filter(|s| s.len() >= lambda) {
            let t = Instant::now();
            let greedy = ensemble.rank_with(seq.items(), lambda, search)?;
            timing.greedy += t.elapsed();
            let t = Instant::now();
            let (_, best) = exhaustive_rank(seq.items(), ranker)?;
            timing.exhaustive += t.elapsed();
            if greedy.score >= best - 1e-9 * best.abs().max(1.0) {
                agree += 1;
            }
            count += 1;
            max_nodes = max_nodes.max(greedy.trace.tree_nodes.iter().copied().max().unwrap_or(0));
        }
        rows.push(ExhaustiveRow {
            lambda,
            sequences: count,
            agreement: if count == 0 {
                f64::NAN
            } else {
                agree as f64 / count as f64
            },
            max_tree_nodes: max_nodes,
        });
    }
    Ok((rows, timing))
}

pub fn run(args: Args, file: &toml::Table) -> CliResult<()> {
    let s = settings(args, file)?;
    let seed = s.seed.expect("resolved");
    let search = s.search.config(sub_seed(seed, "search"))?;
    let ensemble = with_fusion(load_model(&s.model)?, s.fusion)?;
    s.search.check_model(&ensemble)?;
    let data = load_dataset(&s.data)?;
    if data.dim != ensemble.dim() {
        return Err(Failure::data(Error::DimensionMismatch {
            expected: ensemble.dim(),
            found: data.dim,
        }));
    }
    let seqs = match s.test_length {
        Some(len) => {
            let count = s.test_count.unwrap_or(data.sequences.len());
            sample_test_sequences(&data, len, count, sub_seed(seed, "test-sampling"))?
        }
        None => data.sequences.clone(),
    };
    let methods = methods(&ensemble, &s);
    let lambdas = needed_lambdas(&ensemble, &methods);
    let per_seq: Vec<Vec<Option<RankingReport>>> = seqs
        .par_iter()
        .map(|seq| evaluate_one(&ensemble, seq, &methods, &lambdas, &search))
        .collect::<midrank::Result<_>>()?;
    let rows: Vec<AggregateReport> = methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let reports: Vec<RankingReport> = per_seq.iter().filter_map(|r| r[j]).collect();
            AggregateReport::from_reports(m.name(), &reports)
        })
        .collect();

    let mut report = json!({"config": s, "rows": rows});
    let mut summary = json!({"config": s, "report": s.out, "rows": rows});
    if s.compare_exhaustive {
        let (exhaustive, timing) = compare_exhaustive(&ensemble, &seqs, &search)?;
        let speedup =
            timing.exhaustive.as_secs_f64() / timing.greedy.as_secs_f64().max(f64::MIN_POSITIVE);
        info!(
            "greedy {:?}, exhaustive {:?}, speedup {speedup:.1}x",
            timing.greedy, timing.exhaustive
        );
        report["exhaustive"] = json!(exhaustive);
        summary["exhaustive"] = json!(exhaustive);
        // wall-clock numbers stay out of the report file so it is reproducible
        summary["timing"] = json!({
            "greedy_seconds": timing.greedy.as_secs_f64(),
            "exhaustive_seconds": timing.exhaustive.as_secs_f64(),
            "speedup": speedup,
        });
    }
    write_file(&s.out, &to_pretty(&report)?)?;
    if let Some(path) = &s.csv {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        for row in &rows {
            w.serialize(row).map_err(Failure::data)?;
        }
        w.flush()
            .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    }
    print!("{}", to_pretty(&summary)?);
    Ok(())
}
