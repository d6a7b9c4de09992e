//! Entropy-gated per-class feature caches and the class centers derived
//! from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{adaptation_fn, dot, FeatureMatrix, FeatureVector, Space};

/// One cached test feature together with the entropy of the prediction
/// that admitted it.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub feature: FeatureVector,
    pub entropy: f64,
    pub arrival_index: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InsertOutcome {
    Inserted,
    Replaced(CacheEntry),
    Rejected,
}

impl InsertOutcome {
    pub fn admitted(&self) -> bool {
        !matches!(self, InsertOutcome::Rejected)
    }
}

/// Bounded store of the lowest-entropy features seen for one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCache {
    class_id: usize,
    capacity: usize,
    dim: usize,
    space: Space,
    /// Kept in arrival order.
    entries: Vec<CacheEntry>,
}

impl ClassCache {
    pub fn new(class_id: usize, capacity: usize, dim: usize, space: Space) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("capacity", "must be at least 1"));
        }
        Ok(Self {
            class_id,
            capacity,
            dim,
            space,
            entries: Vec::with_capacity(capacity),
        })
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest entropy currently stored, with the oldest entry winning ties.
    fn worst(&self) -> Option<usize> {
        let mut worst: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            match worst {
                None => worst = Some(i),
                Some(w) => {
                    let cur = &self.entries[w];
                    if e.entropy > cur.entropy
                        || (e.entropy == cur.entropy && e.arrival_index < cur.arrival_index)
                    {
                        worst = Some(i);
                    }
                }
            }
        }
        worst
    }

    pub fn max_entropy(&self) -> Option<f64> {
        self.worst().map(|i| self.entries[i].entropy)
    }

    /// Three-branch admission rule: append below capacity, otherwise
    /// replace the highest-entropy entry if the newcomer is strictly more
    /// confident, otherwise reject.
    pub fn consider_insert(&mut self, entry: CacheEntry) -> Result<InsertOutcome> {
        if entry.feature.space() != self.space {
            return Err(Error::SpaceMismatch {
                expected: self.space,
                found: entry.feature.space(),
            });
        }
        if entry.feature.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: entry.feature.dim(),
            });
        }
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
            return Ok(InsertOutcome::Inserted);
        }
        let worst = self.worst().expect("full cache has entries");
        if entry.entropy < self.entries[worst].entropy {
            let evicted = self.entries.remove(worst);
            self.entries.push(entry);
            Ok(InsertOutcome::Replaced(evicted))
        } else {
            Ok(InsertOutcome::Rejected)
        }
    }

    /// Entries ordered by arrival index.
    pub fn sorted_entries(&self) -> Vec<&CacheEntry> {
        let mut v: Vec<&CacheEntry> = self.entries.iter().collect();
        v.sort_by_key(|e| e.arrival_index);
        v
    }

    pub(crate) fn restore(&mut self, entries: Vec<CacheEntry>) -> Result<()> {
        if entries.len() > self.capacity {
            return Err(Error::SchemaMismatch(format!(
                "class {} holds {} entries, capacity {}",
                self.class_id,
                entries.len(),
                self.capacity
            )));
        }
        self.entries.clear();
        for e in entries {
            if e.feature.dim() != self.dim || e.feature.space() != self.space {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: e.feature.dim(),
                });
            }
            self.entries.push(e);
        }
        self.entries.sort_by_key(|e| e.arrival_index);
        Ok(())
    }
}

/// Visual class center in the shared space: the adaptation-weighted sum of
/// cached features, `phi(query · Mᵀ) · M`, scaled to unit norm.
pub fn css_class_center(
    cache: &ClassCache,
    query: &FeatureVector,
    alpha: f64,
) -> Result<FeatureVector> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    if query.dim() != cache.dim {
        return Err(Error::DimensionMismatch {
            expected: cache.dim,
            found: query.dim(),
        });
    }
    let mut acc = vec![0.0; cache.dim];
    for e in &cache.entries {
        let w = adaptation_fn(dot(query.values(), e.feature.values()), alpha);
        for (a, x) in acc.iter_mut().zip(e.feature.values()) {
            *a += w * x;
        }
    }
    FeatureVector::unit(acc, cache.space)
}

/// How auxiliary-space class centers are aggregated from the cache.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfvCenterMode {
    /// Plain centroid of the cached features.
    #[default]
    Average,
    /// Softmax(query · Mᵀ / tau_attn)-weighted mean.
    AttnWeighted,
    /// Exponential moving average in arrival order.
    Ema,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AfvCenterParams {
    pub attn_temperature: f64,
    pub ema_decay: f64,
}

impl Default for AfvCenterParams {
    fn default() -> Self {
        Self {
            attn_temperature: 0.01,
            ema_decay: 0.1,
        }
    }
}

pub fn afv_class_center(
    cache: &ClassCache,
    query: Option<&FeatureVector>,
    mode: AfvCenterMode,
    params: AfvCenterParams,
) -> Result<FeatureVector> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    let dim = cache.dim;
    let mut acc = vec![0.0; dim];
    match mode {
        AfvCenterMode::Average => {
            for e in &cache.entries {
                for (a, x) in acc.iter_mut().zip(e.feature.values()) {
                    *a += x;
                }
            }
            let n = cache.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
        AfvCenterMode::AttnWeighted => {
            let q = query.ok_or(Error::MissingQuery)?;
            if q.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: q.dim(),
                });
            }
            let logits: Vec<f64> = cache
                .entries
                .iter()
                .map(|e| dot(q.values(), e.feature.values()))
                .collect();
            let weights = crate::math::softmax(&logits, params.attn_temperature)?;
            for (e, w) in cache.entries.iter().zip(&weights.scores) {
                for (a, x) in acc.iter_mut().zip(e.feature.values()) {
                    *a += w * x;
                }
            }
        }
        AfvCenterMode::Ema => {
            let lambda = params.ema_decay;
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::param("ema_decay", format!("{lambda} not in (0, 1]")));
            }
            let ordered = cache.sorted_entries();
            acc.copy_from_slice(ordered[0].feature.values());
            for e in &ordered[1..] {
                for (a, x) in acc.iter_mut().zip(e.feature.values()) {
                    *a = (1.0 - lambda) * *a + lambda * x;
                }
            }
        }
    }
    FeatureVector::unit(acc, cache.space)
}

/// One-hot pseudo-label matrix stored as a label per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoLabels {
    pub classes: usize,
    pub labels: Vec<usize>,
}

impl PseudoLabels {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.labels
            .iter()
            .map(|&c| {
                let mut row = vec![0.0; self.classes];
                row[c] = 1.0;
                row
            })
            .collect()
    }
}

/// Flattened cache contents: feature rows ordered by (class, arrival) and
/// the matching one-hot labels, for each space.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheSnapshot {
    pub css: FeatureMatrix,
    pub css_labels: PseudoLabels,
    pub afv: FeatureMatrix,
    pub afv_labels: PseudoLabels,
}

/// The pair of per-class caches, one per feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct DualCache {
    pub css: Vec<ClassCache>,
    pub afv: Vec<ClassCache>,
}

impl DualCache {
    pub fn new(
        classes: usize,
        css_dim: usize,
        afv_dim: usize,
        css_capacity: usize,
        afv_capacity: usize,
    ) -> Result<Self> {
        let css = (0..classes)
            .map(|c| ClassCache::new(c, css_capacity, css_dim, Space::Css))
            .collect::<Result<Vec<_>>>()?;
        let afv = (0..classes)
            .map(|c| ClassCache::new(c, afv_capacity, afv_dim, Space::Afv))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { css, afv })
    }

    pub fn classes(&self) -> usize {
        self.css.len()
    }

    pub fn snapshot_matrices(&self) -> CacheSnapshot {
        let (css, css_labels) = flatten(&self.css, Space::Css);
        let (afv, afv_labels) = flatten(&self.afv, Space::Afv);
        CacheSnapshot {
            css,
            css_labels,
            afv,
            afv_labels,
        }
    }
}

fn flatten(caches: &[ClassCache], space: Space) -> (FeatureMatrix, PseudoLabels) {
    let dim = caches.first().map_or(1, |c| c.dim);
    let mut m = FeatureMatrix::empty(dim, space);
    let mut labels = Vec::new();
    for cache in caches {
        for e in cache.sorted_entries() {
            m.push_values(e.feature.values())
                .expect("cache entries share the cache dimension");
            labels.push(cache.class_id);
        }
    }
    (
        m,
        PseudoLabels {
            classes: caches.len(),
            labels,
        },
    )
}
