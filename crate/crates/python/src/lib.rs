//! Python bindings: metrics, feature maps, synthetic data, training and
//! ranking. Sequences cross the boundary as `(items, order)` pairs, where
//! `items` is a list of feature vectors and `order` lists item indices
//! best first.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use midrank::data::{generate_synthetic as generate, random_direction, SyntheticConfig};
use midrank::features::{psi as feature_map, FeatureMapKind};
use midrank::fusion::{Ensemble, FusionStrategy};
use midrank::inference::{exhaustive_rank as exhaustive, SearchConfig};
use midrank::metrics;
use midrank::model;
use midrank::sequence::{FeatureVector, Permutation, Sequence};
use midrank::training::{train_ensemble, TrainConfig};

type SequencePair = (Vec<Vec<f64>>, Vec<usize>);

fn err(e: midrank::Error) -> PyErr {
    match e {
        midrank::Error::UnknownLambda(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn perm(order: Vec<usize>) -> PyResult<Permutation> {
    Permutation::new(order).map_err(err)
}

fn vectors(items: Vec<Vec<f64>>) -> PyResult<Vec<FeatureVector>> {
    items
        .into_iter()
        .map(|v| FeatureVector::new(v).map_err(err))
        .collect()
}

fn parse<T: std::str::FromStr>(text: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    text.parse()
        .map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn kendall_tau(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    metrics::kendall_tau(&perm(pred)?, &perm(truth)?).map_err(err)
}

#[pyfunction]
fn pair_accuracy(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    metrics::pair_accuracy(&perm(pred)?, &perm(truth)?).map_err(err)
}

#[pyfunction]
fn ndcg(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    metrics::ndcg(&perm(pred)?, &perm(truth)?).map_err(err)
}

/// Joint feature vector of an ordered window.
#[pyfunction]
#[pyo3(signature = (window, kind = "stacked_diff"))]
fn psi(window: Vec<Vec<f64>>, kind: &str) -> PyResult<Vec<f64>> {
    let kind: FeatureMapKind = parse(kind)?;
    Ok(feature_map(&vectors(window)?, kind)
        .map_err(err)?
        .into_inner())
}

/// Sequences whose order sorts a noisy projection on a random direction.
#[pyfunction]
#[pyo3(signature = (dim, num_sequences, seq_len, noise_sigma = 0.1, seed = 0, direction_seed = 0))]
fn generate_synthetic(
    dim: usize,
    num_sequences: usize,
    seq_len: usize,
    noise_sigma: f64,
    seed: u64,
    direction_seed: u64,
) -> PyResult<Vec<SequencePair>> {
    let data = generate(&SyntheticConfig {
        dim,
        num_sequences,
        seq_len,
        latent_direction: random_direction(dim, direction_seed),
        noise_sigma,
        seed,
    })
    .map_err(err)?;
    Ok(data
        .sequences
        .iter()
        .map(|s| {
            let items = s.items().iter().map(|v| v.as_slice().to_vec()).collect();
            let order = s
                .ground_truth()
                .expect("generated with ground truth")
                .as_slice()
                .to_vec();
            (items, order)
        })
        .collect())
}

/// A trained ensemble of per-length rankers.
#[pyclass(frozen)]
struct Model {
    inner: Ensemble,
}

fn search(trees: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        num_trees: trees,
        seed,
        ..Default::default()
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (sequences, lambdas = None, mu = 1e-3, feature_map = "stacked_diff", positives_per_sequence = 10, seed = 0))]
    fn train(
        py: Python<'_>,
        sequences: Vec<SequencePair>,
        lambdas: Option<Vec<usize>>,
        mu: f64,
        feature_map: &str,
        positives_per_sequence: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let seqs = sequences
            .into_iter()
            .enumerate()
            .map(|(i, (items, order))| {
                Sequence::new(format!("seq-{i}"), vectors(items)?, Some(perm(order)?)).map_err(err)
            })
            .collect::<PyResult<Vec<_>>>()?;
        let mut config = TrainConfig {
            mu,
            feature_map: parse(feature_map)?,
            positives_per_sequence,
            seed,
            ..Default::default()
        };
        if let Some(l) = lambdas {
            config.lambda_range = l;
        }
        let inner = py.detach(|| train_ensemble(&seqs, &config)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        model::to_json::<()>(&self.inner, None).map_err(err)
    }

    #[getter]
    fn lambdas(&self) -> Vec<usize> {
        self.inner.rankers().iter().map(|r| r.lambda).collect()
    }

    #[getter]
    fn fusion(&self) -> String {
        self.inner.fusion.to_string()
    }

    /// Fused ordering of `items`, best first.
    #[pyo3(signature = (items, trees = 5, seed = 0, fusion = None))]
    fn rank(
        &self,
        py: Python<'_>,
        items: Vec<Vec<f64>>,
        trees: usize,
        seed: u64,
        fusion: Option<&str>,
    ) -> PyResult<Vec<usize>> {
        let items = vectors(items)?;
        let ensemble = match fusion {
            Some(f) => &self
                .inner
                .clone()
                .with_fusion(parse::<FusionStrategy>(f)?)
                .map_err(err)?,
            None => &self.inner,
        };
        let (p, _) = py
            .detach(|| ensemble.rank_sequence(&items, &search(trees, seed)))
            .map_err(err)?;
        Ok(p.into_inner())
    }

    /// `(order, score)` of the ranker of one length.
    #[pyo3(signature = (items, lam, trees = 5, seed = 0))]
    fn rank_length(
        &self,
        items: Vec<Vec<f64>>,
        lam: usize,
        trees: usize,
        seed: u64,
    ) -> PyResult<(Vec<usize>, f64)> {
        let o = self
            .inner
            .rank_with(&vectors(items)?, lam, &search(trees, seed))
            .map_err(err)?;
        Ok((o.permutation.into_inner(), o.score))
    }

    /// Best `(order, score)` over every ordering; short sequences only.
    fn exhaustive_rank(&self, items: Vec<Vec<f64>>, lam: usize) -> PyResult<(Vec<usize>, f64)> {
        let ranker = self
            .inner
            .ranker(lam)
            .ok_or_else(|| err(midrank::Error::UnknownLambda(lam)))?;
        let (p, s) = exhaustive(&vectors(items)?, ranker).map_err(err)?;
        Ok((p.into_inner(), s))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(lambdas={:?}, fusion={})",
            self.lambdas(),
            self.inner.fusion
        )
    }
}

#[pymodule]
fn midrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(pair_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
