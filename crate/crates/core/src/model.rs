//! Versioned JSON envelope for trained ensembles.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::features::FeatureMapKind;
use crate::fusion::{Ensemble, FusionStrategy};
use crate::sequence::FeatureVector;
use crate::training::LengthRanker;

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RankerRecord {
    lambda: usize,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u32,
    feature_map: FeatureMapKind,
    d: usize,
    rankers: Vec<RankerRecord>,
    #[serde(default)]
    fusion: FusionStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fusion_lambdas: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    best_single: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<Box<RawValue>>,
}

/// Serialize `ensemble`, embedding `config` (any JSON) when given.
pub fn to_json<C: Serialize>(ensemble: &Ensemble, config: Option<&C>) -> Result<String> {
    let config = config
        .map(|c| serde_json::to_string(c).and_then(RawValue::from_string))
        .transpose()?;
    let envelope = Envelope {
        version: MODEL_VERSION,
        feature_map: ensemble.feature_map(),
        d: ensemble.dim(),
        rankers: ensemble
            .rankers()
            .iter()
            .map(|r| RankerRecord {
                lambda: r.lambda,
                theta: r.theta.as_slice().to_vec(),
            })
            .collect(),
        fusion: ensemble.fusion,
        fusion_lambdas: Some(ensemble.fusion_lambdas().to_vec()),
        best_single: ensemble.best_single(),
        config,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<Ensemble> {
    let envelope: Envelope = serde_json::from_str(text)?;
    if envelope.version != MODEL_VERSION {
        return Err(Error::Parse(format!(
            "unsupported model version {}, expected {MODEL_VERSION}",
            envelope.version
        )));
    }
    let rankers = envelope
        .rankers
        .into_iter()
        .map(|r| {
            LengthRanker::new(
                r.lambda,
                FeatureVector::new(r.theta)?,
                envelope.feature_map,
                envelope.d,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ensemble = Ensemble::new(rankers, envelope.fusion)?;
    if let Some(lambdas) = envelope.fusion_lambdas {
        ensemble = ensemble.with_fusion_lambdas(lambdas)?;
    }
    match envelope.best_single {
        Some(lambda) => ensemble.with_best_single(lambda),
        None => Ok(ensemble),
    }
}

pub fn save_model<C: Serialize>(
    ensemble: &Ensemble,
    config: Option<&C>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(ensemble, config)?)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Ensemble> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })?;
    from_json(&text)
}
