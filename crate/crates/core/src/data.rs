//! Dataset files and the synthetic sequence generator.
//!
//! A dataset file is JSON Lines: a header `{"dim": d, "split": "train"}`
//! followed by one `{"id", "items", "order"}` object per sequence. Paths
//! ending in `.gz` are gzip-compressed.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, stream, Rng};
use crate::sequence::{l2_normalize, norm, FeatureVector, Permutation, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dim: usize,
    pub split: Split,
    pub sequences: Vec<Sequence>,
    /// Raw JSON of the configuration that produced the file, if recorded.
    pub provenance: Option<String>,
}

impl Dataset {
    pub fn new(dim: usize, split: Split, sequences: Vec<Sequence>) -> Result<Self> {
        if let Some(s) = sequences.iter().find(|s| s.dim() != dim) {
            return Err(Error::InvariantViolation {
                sequence: s.id().to_string(),
                reason: format!("dimension {} differs from dataset dimension {dim}", s.dim()),
            });
        }
        Ok(Self {
            dim,
            split,
            sequences,
            provenance: None,
        })
    }

    pub fn num_items(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    dim: usize,
    split: Split,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a RawValue>,
}

#[derive(Deserialize)]
struct HeaderIn {
    dim: usize,
    split: Split,
    #[serde(default)]
    config: Option<Box<RawValue>>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    items: Vec<&'a [f64]>,
    order: Option<&'a [usize]>,
}

#[derive(Deserialize)]
struct RecordIn {
    id: String,
    items: Vec<Vec<f64>>,
    #[serde(default)]
    order: Option<Vec<usize>>,
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })?;
    let reader: Box<dyn Read> = if is_gzip(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

fn parse_record(line: &str, lineno: usize, dim: usize) -> Result<Sequence> {
    let rec: RecordIn =
        serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
    let violation = |reason: String| Error::InvariantViolation {
        sequence: rec.id.clone(),
        reason,
    };
    let mut items = Vec::with_capacity(rec.items.len());
    for (i, values) in rec.items.iter().enumerate() {
        if values.len() != dim {
            return Err(violation(format!(
                "item {i} has dimension {}, header declares {dim}",
                values.len()
            )));
        }
        items.push(
            FeatureVector::new(values.clone()).map_err(|e| violation(format!("item {i}: {e}")))?,
        );
    }
    let order = rec
        .order
        .clone()
        .map(Permutation::new)
        .transpose()
        .map_err(|e| violation(format!("order: {e}")))?;
    Sequence::new(rec.id.clone(), items, order)
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate().filter(|(_, l)| match l {
        Ok(l) => !l.trim().is_empty(),
        Err(_) => true,
    });
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let header: HeaderIn =
        serde_json::from_str(&header?).map_err(|e| Error::Parse(format!("header: {e}")))?;
    let mut sequences = Vec::new();
    for (i, line) in lines {
        sequences.push(parse_record(&line?, i + 1, header.dim)?);
    }
    let mut ids = HashSet::new();
    if let Some(s) = sequences.iter().find(|s| !ids.insert(s.id().to_string())) {
        return Err(Error::InvariantViolation {
            sequence: s.id().to_string(),
            reason: "duplicate sequence id".into(),
        });
    }
    let mut dataset = Dataset::new(header.dim, header.split, sequences)?;
    dataset.provenance = header.config.map(|c| c.get().to_string());
    Ok(dataset)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(open(path.as_ref())?)
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    let raw = match &dataset.provenance {
        Some(text) => Some(RawValue::from_string(text.clone())?),
        None => None,
    };
    let header = HeaderOut {
        dim: dataset.dim,
        split: dataset.split,
        config: raw.as_deref(),
    };
    serde_json::to_writer(&mut writer, &header)?;
    writer.write_all(b"\n")?;
    for seq in &dataset.sequences {
        let record = RecordOut {
            id: seq.id(),
            items: seq.items().iter().map(|v| v.as_slice()).collect(),
            order: seq.ground_truth().map(|p| p.as_slice()),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if is_gzip(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_dataset(dataset, &mut enc)?;
        enc.finish()?;
        Ok(())
    } else {
        write_dataset(dataset, BufWriter::new(file))
    }
}

/// Fails if any feature vector occurs in both datasets.
pub fn check_disjoint(a: &Dataset, b: &Dataset) -> Result<()> {
    let key = |v: &FeatureVector| {
        v.as_slice()
            .iter()
            .map(|x| x.to_bits())
            .collect::<Vec<u64>>()
    };
    let seen: HashSet<Vec<u64>> = a
        .sequences
        .iter()
        .flat_map(|s| s.items().iter().map(key))
        .collect();
    for seq in &b.sequences {
        if let Some(i) = seq.items().iter().position(|v| seen.contains(&key(v))) {
            return Err(Error::InvariantViolation {
                sequence: seq.id().to_string(),
                reason: format!("item {i} also appears in the {:?} split", a.split),
            });
        }
    }
    Ok(())
}

/// Sequences of random unit vectors ordered by a noisy linear key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub num_sequences: usize,
    pub seq_len: usize,
    /// Direction of the latent ordering criterion; normalized before use.
    pub latent_direction: Vec<f64>,
    /// Standard deviation of the Gaussian noise added to the sort key.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if self.seq_len < 2 {
            return Err(Error::TooShort(self.seq_len));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be a non-negative number, got {}",
                self.noise_sigma
            )));
        }
        if self.latent_direction.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.latent_direction.len(),
            });
        }
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(norm(&self.latent_direction) > 0.0) {
            return Err(Error::InvalidConfig(
                "latent direction must be non-zero".into(),
            ));
        }
        Ok(())
    }
}

fn random_unit(dim: usize, rng: &mut Rng) -> FeatureVector {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if norm(&raw) > 0.0 {
            return l2_normalize(&raw).expect("gaussian draws are finite");
        }
    }
}

/// A uniformly random unit vector.
pub fn random_direction(dim: usize, seed: u64) -> Vec<f64> {
    random_unit(dim, &mut rng_from_seed(seed)).into_inner()
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    let direction = l2_normalize(&config.latent_direction)?;
    let mut item_rng = stream(config.seed, "items");
    let mut noise_rng = stream(config.seed, "key-noise");
    let mut sequences = Vec::with_capacity(config.num_sequences);
    for s in 0..config.num_sequences {
        let items: Vec<FeatureVector> = (0..config.seq_len)
            .map(|_| random_unit(config.dim, &mut item_rng))
            .collect();
        let keys: Vec<f64> = items
            .iter()
            .map(|x| {
                let noise: f64 = StandardNormal.sample(&mut noise_rng);
                x.dot(direction.as_slice()) + config.noise_sigma * noise
            })
            .collect();
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
        sequences.push(Sequence::new(
            format!("seq-{s}"),
            items,
            Some(Permutation::new(order)?),
        )?);
    }
    Dataset::new(config.dim, Split::Train, sequences)
}

/// Draw `count` sequences of `length` items from the split's ordered
/// sequences. Ground truth is the order the source sequence induces on the
/// drawn items.
pub fn sample_test_sequences(
    dataset: &Dataset,
    length: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Sequence>> {
    if length < 2 {
        return Err(Error::TooShort(length));
    }
    let sources: Vec<&Sequence> = dataset
        .sequences
        .iter()
        .filter(|s| s.len() >= length && s.ground_truth().is_some())
        .collect();
    if sources.is_empty() {
        let available = dataset.sequences.iter().map(|s| s.len()).max().unwrap_or(0);
        return Err(Error::InsufficientItems {
            requested: length,
            available,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let src = sources[rng.random_range(0..sources.len())];
        let rank_of = src.ground_truth().expect("filtered above").inverse();
        let picked = index::sample(&mut rng, src.len(), length).into_vec();
        let items = picked.iter().map(|&i| src.items()[i].clone()).collect();
        let mut order: Vec<usize> = (0..length).collect();
        order.sort_by_key(|&j| rank_of.as_slice()[picked[j]]);
        out.push(Sequence::new(
            format!("{}/{k}", src.id()),
            items,
            Some(Permutation::new(order)?),
        )?);
    }
    Ok(out)
}
