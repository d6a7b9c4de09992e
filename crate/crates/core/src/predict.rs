//! Prediction paths: zero-shot, the multi-view entropy gate, the cache
//! baseline, masked shared-space and auxiliary-space predictions, fusion,
//! and the fusion-weight grid search.

use serde::{Deserialize, Serialize};

use crate::cache::PseudoLabels;
use crate::error::{Error, Result};
use crate::hyperclass::{selection_count, InlierMask};
use crate::math::{
    adaptation_fn, argmax, entropy_unchecked, softmax, FeatureMatrix, FeatureVector,
    PredictionKind, PredictionVector,
};

/// Linear weights for zero-shot, shared-space and auxiliary-space scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            beta1: 1.0,
            beta2: 1.0,
            beta3: 1.0,
        }
    }
}

impl FusionWeights {
    pub fn new(beta1: f64, beta2: f64, beta3: f64) -> Result<Self> {
        let w = Self {
            beta1,
            beta2,
            beta3,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.beta1, self.beta2, self.beta3];
        if all.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(Error::param("betas", "weights must be finite and nonnegative"));
        }
        if all.iter().all(|&b| b == 0.0) {
            return Err(Error::param("betas", "at least one weight must be positive"));
        }
        Ok(())
    }
}

/// All augmented views of one test sample in both spaces; view 0 is the
/// un-augmented original.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewBatch {
    pub css: Vec<FeatureVector>,
    pub afv: Vec<FeatureVector>,
}

impl ViewBatch {
    pub fn new(css: Vec<FeatureVector>, afv: Vec<FeatureVector>) -> Result<Self> {
        if css.is_empty() {
            return Err(Error::param("views", "a sample needs at least one view"));
        }
        if css.len() != afv.len() {
            return Err(Error::DimensionMismatch {
                expected: css.len(),
                found: afv.len(),
            });
        }
        Ok(Self { css, afv })
    }

    pub fn len(&self) -> usize {
        self.css.len()
    }

    pub fn is_empty(&self) -> bool {
        self.css.is_empty()
    }

    pub fn original_css(&self) -> &FeatureVector {
        &self.css[0]
    }

    pub fn original_afv(&self) -> &FeatureVector {
        &self.afv[0]
    }
}

/// Softmax over `query · text_kᵀ / temperature`.
pub fn zero_shot(
    query: &FeatureVector,
    text_features: &FeatureMatrix,
    temperature: f64,
) -> Result<PredictionVector> {
    softmax(&text_features.similarities(query)?, temperature)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateOutput {
    pub mean_probability: PredictionVector,
    pub entropy: f64,
    pub pseudo_label: usize,
    /// Views that entered the average, in ascending entropy order.
    pub selected_views: Vec<usize>,
}

/// Indices of the `ceil(ratio · n)` lowest-entropy views; stable on ties.
pub fn select_confident_views(entropies: &[f64], ratio: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..entropies.len()).collect();
    idx.sort_by(|&a, &b| entropies[a].total_cmp(&entropies[b]).then(a.cmp(&b)));
    idx.truncate(selection_count(ratio, entropies.len()));
    idx
}

/// Multi-view marginal entropy: zero-shot on every view, keep the most
/// confident fraction, average them, and report the entropy and argmax of
/// the average.
pub fn marginal_entropy_gate(
    views: &[FeatureVector],
    text_features: &FeatureMatrix,
    temperature: f64,
    ratio: f64,
) -> Result<GateOutput> {
    if views.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param("view_ratio", format!("{ratio} not in (0, 1]")));
    }
    let probs = views
        .iter()
        .map(|v| zero_shot(v, text_features, temperature))
        .collect::<Result<Vec<_>>>()?;
    let entropies: Vec<f64> = probs.iter().map(|p| entropy_unchecked(&p.scores)).collect();
    let selected = select_confident_views(&entropies, ratio);

    let k = text_features.rows();
    let mut mean = vec![0.0; k];
    for &i in &selected {
        for (m, p) in mean.iter_mut().zip(&probs[i].scores) {
            *m += p;
        }
    }
    let n = selected.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let entropy = entropy_unchecked(&mean);
    let pseudo_label = argmax(&mean);
    Ok(GateOutput {
        mean_probability: PredictionVector::new(mean, PredictionKind::Probability),
        entropy,
        pseudo_label,
        selected_views: selected,
    })
}

/// Cache baseline: `phi(query · Mᵀ) · L`.
pub fn tda_adapted(
    query: &FeatureVector,
    cache: &FeatureMatrix,
    labels: &PseudoLabels,
    alpha: f64,
) -> Result<Vec<f64>> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    if labels.rows() != cache.rows() {
        return Err(Error::DimensionMismatch {
            expected: cache.rows(),
            found: labels.rows(),
        });
    }
    let sims = cache.similarities(query)?;
    let mut out = vec![0.0; labels.classes];
    for (s, &c) in sims.iter().zip(&labels.labels) {
        out[c] += adaptation_fn(*s, alpha);
    }
    Ok(out)
}

/// Per-class feature sums, i.e. the columns of `Mᵀ L` laid out one class
/// per row.
pub fn class_feature_sums(cache: &FeatureMatrix, labels: &PseudoLabels) -> Result<FeatureMatrix> {
    if labels.rows() != cache.rows() {
        return Err(Error::DimensionMismatch {
            expected: cache.rows(),
            found: labels.rows(),
        });
    }
    let dim = cache.dim();
    let mut sums = vec![0.0; labels.classes * dim];
    for (row, &c) in cache.iter_rows().zip(&labels.labels) {
        for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row) {
            *s += x;
        }
    }
    FeatureMatrix::from_flat(dim, cache.space(), sums)
}

/// Linear cache logits grouped as `query · (Mᵀ L)`: similarity to each
/// class's feature sum instead of a per-entry vote.
pub fn cache_logits_centroid_form(
    query: &FeatureVector,
    cache: &FeatureMatrix,
    labels: &PseudoLabels,
) -> Result<Vec<f64>> {
    class_feature_sums(cache, labels)?.similarities(query)
}

/// Shared-space node set: the K text features followed by the K visual
/// centers, where a class without a center reuses its text feature.
pub fn assemble_css_nodes(
    text_features: &FeatureMatrix,
    visual_centers: &[Option<FeatureVector>],
) -> Result<FeatureMatrix> {
    let k = text_features.rows();
    if visual_centers.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: visual_centers.len(),
        });
    }
    let mut nodes = text_features.clone();
    for (i, c) in visual_centers.iter().enumerate() {
        match c {
            Some(c) => nodes.push(c)?,
            None => nodes.push_values(text_features.row(i))?,
        }
    }
    Ok(nodes)
}

/// Masked softmax over the 2K shared-space nodes, folded back to K classes
/// by averaging each text node with its visual node.
pub fn css_prediction(
    query: &FeatureVector,
    nodes: &FeatureMatrix,
    mask: &InlierMask,
    temperature: f64,
) -> Result<PredictionVector> {
    let n = nodes.rows();
    if !n.is_multiple_of(2) || mask.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mask.len(),
        });
    }
    let k = n / 2;
    let p = softmax(&nodes.similarities(query)?, temperature)?;
    let masked: Vec<f64> = p
        .scores
        .iter()
        .zip(&mask.bits)
        .map(|(p, &b)| if b { *p } else { 0.0 })
        .collect();
    let folded = (0..k).map(|i| (masked[i] + masked[i + k]) / 2.0).collect();
    Ok(PredictionVector::new(folded, PredictionKind::MaskedProbability))
}

/// Masked softmax over auxiliary class centers. Classes without a center
/// take no part in the softmax and score 0.
pub fn afv_prediction(
    query: &FeatureVector,
    centers: &[Option<FeatureVector>],
    mask: &InlierMask,
    temperature: f64,
) -> Result<PredictionVector> {
    if mask.len() != centers.len() {
        return Err(Error::DimensionMismatch {
            expected: centers.len(),
            found: mask.len(),
        });
    }
    let mut present = Vec::new();
    let mut logits = Vec::new();
    for (i, c) in centers.iter().enumerate() {
        if let Some(c) = c {
            logits.push(query.dot(c)?);
            present.push(i);
        }
    }
    if present.is_empty() {
        return Err(Error::EmptyAfv);
    }
    let p = softmax(&logits, temperature)?;
    let mut out = vec![0.0; centers.len()];
    for (&i, &pi) in present.iter().zip(&p.scores) {
        if mask.bits[i] {
            out[i] = pi;
        }
    }
    Ok(PredictionVector::new(out, PredictionKind::MaskedProbability))
}

/// `beta1 · zs + beta2 · css + beta3 · afv`.
pub fn fuse(
    p_zs: &PredictionVector,
    p_css: &PredictionVector,
    p_afv: &PredictionVector,
    w: FusionWeights,
) -> Result<PredictionVector> {
    let k = p_zs.len();
    for p in [p_css, p_afv] {
        if p.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: p.len(),
            });
        }
    }
    Ok(PredictionVector::new(
        fuse_scores(&p_zs.scores, &p_css.scores, &p_afv.scores, w),
        PredictionKind::Fused,
    ))
}

fn fuse_scores(zs: &[f64], css: &[f64], afv: &[f64], w: FusionWeights) -> Vec<f64> {
    zs.iter()
        .zip(css)
        .zip(afv)
        .map(|((a, b), c)| w.beta1 * a + w.beta2 * b + w.beta3 * c)
        .collect()
}

/// The three weight-independent score vectors of one processed sample,
/// which is all a fusion-weight search needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathScores {
    pub zero_shot: Vec<f64>,
    pub css: Vec<f64>,
    pub afv: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub beta2: f64,
    pub beta3: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: FusionWeights,
    pub best_accuracy: f64,
    pub grid: Vec<GridPoint>,
}

/// Grid values `0, step, 2·step, …` up to `max`.
pub fn beta_grid(step: f64, max: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::param("step", format!("{step} must be positive")));
    }
    if !(max >= 0.0) || !max.is_finite() {
        return Err(Error::param("max", format!("{max} must be nonnegative")));
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

/// Number of samples whose fused argmax matches the label.
pub fn fused_correct(records: &[PathScores], w: FusionWeights) -> usize {
    records
        .iter()
        .filter(|r| argmax(&fuse_scores(&r.zero_shot, &r.css, &r.afv, w)) == r.label)
        .count()
}

/// Fixes `beta1 = 1` and searches `(beta2, beta3)` over the grid for the
/// best top-1 accuracy. Ties keep the lexicographically smaller pair.
pub fn sweep_betas(records: &[PathScores], step: f64, max: f64) -> Result<SweepResult> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let values = beta_grid(step, max)?;
    let n = records.len() as f64;
    let mut grid = Vec::with_capacity(values.len() * values.len());
    let mut best = (FusionWeights::new(1.0, values[0], values[0])?, 0usize);
    let mut first = true;
    for &b2 in &values {
        for &b3 in &values {
            let w = FusionWeights {
                beta1: 1.0,
                beta2: b2,
                beta3: b3,
            };
            let correct = fused_correct(records, w);
            grid.push(GridPoint {
                beta2: b2,
                beta3: b3,
                accuracy: correct as f64 / n,
            });
            if first || correct > best.1 {
                best = (w, correct);
                first = false;
            }
        }
    }
    Ok(SweepResult {
        best: best.0,
        best_accuracy: best.1 as f64 / n,
        grid,
    })
}
