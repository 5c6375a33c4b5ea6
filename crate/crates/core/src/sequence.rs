//! Sequence and permutation domain types.
//!
//! Every index is 0-based. A [`Permutation`] lists item indices from the
//! first (highest ranked) to the last position, so `order[0]` is the item
//! placed at rank 1.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty vector of feature activations.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry(pos));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Unit-norm copy of this vector; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        Self(normalize_finite(&self.0))
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(de)?;
        FeatureVector::new(values).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    // scale first so squares of large entries cannot overflow
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

fn normalize_finite(values: &[f64]) -> Vec<f64> {
    let n = norm(values);
    if n == 0.0 {
        return values.to_vec();
    }
    values.iter().map(|v| v / n).collect()
}

/// L2-normalize raw values. All-zero input comes back unchanged.
pub fn l2_normalize(values: &[f64]) -> Result<FeatureVector> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry(pos));
    }
    FeatureVector::new(normalize_finite(values))
}

/// A bijection on `0..len`, with `len >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let len = order.len();
        if len < 2 {
            return Err(Error::TooShort(len));
        }
        let mut seen = vec![false; len];
        for &index in &order {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
            if seen[index] {
                return Err(Error::DuplicateIndex(index));
            }
            seen[index] = true;
        }
        Ok(Self(order))
    }

    /// Caller guarantees `order` is a bijection of length >= 2.
    pub(crate) fn from_vec_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(Permutation::new(order.clone()).is_ok());
        Self(order)
    }

    pub fn identity(len: usize) -> Result<Self> {
        Self::new((0..len).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `inverse()[item]` is the position of `item`.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (pos, &item) in self.0.iter().enumerate() {
            inv[item] = pos;
        }
        Self(inv)
    }

    /// `(self ∘ other)[i] = self[other[i]]`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(Self(other.0.iter().map(|&i| self.0[i]).collect()))
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// Copy with positions `a` and `b` exchanged.
    pub fn swapped(&self, a: usize, b: usize) -> Self {
        let mut order = self.0.clone();
        order.swap(a, b);
        Self(order)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let order = Vec::<usize>::deserialize(de)?;
        Permutation::new(order).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[usize]> for Permutation {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

/// An unordered list of items, optionally with its ground-truth order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    id: String,
    items: Vec<FeatureVector>,
    ground_truth: Option<Permutation>,
}

impl Sequence {
    pub fn new(
        id: impl Into<String>,
        items: Vec<FeatureVector>,
        ground_truth: Option<Permutation>,
    ) -> Result<Self> {
        let id = id.into();
        let violation = |reason: String| Error::InvariantViolation {
            sequence: id.clone(),
            reason,
        };
        if items.len() < 2 {
            return Err(violation(format!(
                "{} items, at least 2 required",
                items.len()
            )));
        }
        let dim = items[0].dim();
        if let Some((i, item)) = items.iter().enumerate().find(|(_, v)| v.dim() != dim) {
            return Err(violation(format!(
                "item {i} has dimension {}, expected {dim}",
                item.dim()
            )));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != items.len() {
                return Err(violation(format!(
                    "ground truth has length {}, sequence has {} items",
                    gt.len(),
                    items.len()
                )));
            }
        }
        Ok(Self {
            id,
            items,
            ground_truth,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn items(&self) -> &[FeatureVector] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.items[0].dim()
    }

    pub fn ground_truth(&self) -> Option<&Permutation> {
        self.ground_truth.as_ref()
    }

    /// Items rearranged into ground-truth order.
    pub fn ordered_items(&self) -> Result<Vec<&FeatureVector>> {
        let gt = self
            .ground_truth
            .as_ref()
            .ok_or_else(|| Error::MissingGroundTruth(self.id.clone()))?;
        Ok(gt.as_slice().iter().map(|&i| &self.items[i]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Vectors are in ground-truth order.
    Positive,
    /// Vectors are a scramble of a positive.
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

/// `lambda` vectors cut from a parent sequence, in a given order.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsequence {
    pub parent_id: String,
    pub start: usize,
    pub vectors: Vec<FeatureVector>,
    pub label: Label,
}

impl Subsequence {
    pub fn lambda(&self) -> usize {
        self.vectors.len()
    }
}

/// The `len - lambda + 1` windows of `lambda` consecutive positions.
pub fn consecutive_subsequences(len: usize, lambda: usize) -> Result<Vec<Range<usize>>> {
    if lambda < 2 || lambda > len {
        return Err(Error::LambdaOutOfRange { lambda, len });
    }
    Ok((0..=len - lambda).map(|j| j..j + lambda).collect())
}
