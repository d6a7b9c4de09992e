//! Shared numeric kernels: feature vectors, similarity, temperature softmax,
//! entropy and the cache adaptation function.
//!
//! Everything here is a pure function over immutable inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a stored vector has unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-4;

/// Which embedding space a feature lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// Shared text/image space of the vision-language model.
    Css,
    /// Auxiliary fine-grained visual space of the self-supervised encoder.
    Afv,
}

impl Space {
    pub fn tag(self) -> u8 {
        match self {
            Space::Css => 0,
            Space::Afv => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Space::Css => "css",
            Space::Afv => "afv",
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Space::Css),
            1 => Some(Space::Afv),
            _ => None,
        }
    }
}

/// An embedding vector tagged with its space.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    space: Space,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, space: Space) -> Self {
        Self { values, space }
    }

    /// Builds a vector and normalizes it to unit length in one step.
    pub fn unit(values: Vec<f64>, space: Space) -> Result<Self> {
        Self::new(values, space).normalize()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOL
    }

    /// Scales the vector to unit Euclidean norm.
    pub fn normalize(&self) -> Result<Self> {
        Ok(Self {
            values: normalized(&self.values)?,
            space: self.space,
        })
    }

    /// Dot product; equals cosine similarity when both vectors are unit.
    pub fn dot(&self, other: &FeatureVector) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(dot(&self.values, &other.values))
    }

    pub(crate) fn check_compatible(&self, other: &FeatureVector) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                expected: self.space,
                found: other.space,
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// Row-major matrix of feature rows sharing one space and dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    space: Space,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn empty(dim: usize, space: Space) -> Self {
        Self {
            dim,
            space,
            data: Vec::new(),
        }
    }

    pub fn from_flat(dim: usize, space: Space, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, space, data })
    }

    pub fn from_rows<'a, I>(dim: usize, space: Space, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut m = Self::empty(dim, space);
        for row in rows {
            m.push(row)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &FeatureVector) -> Result<()> {
        if row.space() != self.space {
            return Err(Error::SpaceMismatch {
                expected: self.space,
                found: row.space(),
            });
        }
        self.push_values(row.values())
    }

    pub fn push_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: values.len(),
            });
        }
        self.data.extend_from_slice(values);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_vector(&self, i: usize) -> FeatureVector {
        FeatureVector::new(self.row(i).to_vec(), self.space)
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// `query · rowᵀ` for every row.
    pub fn similarities(&self, query: &FeatureVector) -> Result<Vec<f64>> {
        if query.space() != self.space {
            return Err(Error::SpaceMismatch {
                expected: self.space,
                found: query.space(),
            });
        }
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: query.dim(),
            });
        }
        Ok(self.iter_rows().map(|r| dot(query.values(), r)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionKind {
    Probability,
    MaskedProbability,
    Fused,
}

/// Length-K vector of nonnegative class scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionVector {
    pub scores: Vec<f64>,
    pub kind: PredictionKind,
}

impl PredictionVector {
    pub fn new(scores: Vec<f64>, kind: PredictionKind) -> Self {
        Self { scores, kind }
    }

    pub fn zeros(k: usize, kind: PredictionKind) -> Self {
        Self::new(vec![0.0; k], kind)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.scores)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &[f64]) -> Result<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(a.iter().map(|x| x / n).collect())
}

/// Normalizes `v` to unit Euclidean norm.
pub fn normalize(v: &FeatureVector) -> Result<FeatureVector> {
    v.normalize()
}

/// Cosine similarity, computed with explicit norms so it is valid for
/// non-unit inputs too.
pub fn cosine(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    a.check_compatible(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a.values(), b.values()) / (na * nb)).clamp(-1.0, 1.0))
}

/// Temperature softmax with max-subtraction.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<PredictionVector> {
    if !(temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    Ok(PredictionVector::new(
        softmax_unchecked(logits, temperature),
        PredictionKind::Probability,
    ))
}

pub(crate) fn softmax_unchecked(logits: &[f64], temperature: f64) -> Vec<f64> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&x| ((x - max) / temperature).exp())
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

/// Shannon entropy in nats. `0 · ln 0` is taken as 0.
pub fn entropy(p: &PredictionVector) -> Result<f64> {
    if let Some(bad) = p.scores.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::NotAProbability(format!("entry {bad} is negative")));
    }
    let sum: f64 = p.scores.iter().sum();
    if (sum - 1.0).abs() > 1e-4 {
        return Err(Error::NotAProbability(format!("entries sum to {sum}")));
    }
    Ok(entropy_unchecked(&p.scores))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `exp(-alpha · (1 - similarity))`.
pub fn adaptation_fn(similarity: f64, alpha: f64) -> f64 {
    (-alpha * (1.0 - similarity)).exp()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
