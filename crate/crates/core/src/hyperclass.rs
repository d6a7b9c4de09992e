//! Hyper-classes: clique centroids ranked against a test feature, and the
//! inlier masks built from the closest ones.

use crate::error::{Error, Result};
use crate::graph::CliqueSet;
use crate::math::{dot, normalized, FeatureMatrix, FeatureVector};

#[derive(Clone, Debug, PartialEq)]
pub struct HyperClass {
    pub members: Vec<usize>,
    pub center: FeatureVector,
}

/// Boolean inlier flag per graph node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InlierMask {
    pub bits: Vec<bool>,
}

impl InlierMask {
    pub fn all(n: usize) -> Self {
        Self {
            bits: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_zero(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

/// One hyper-class per clique, centered on the normalized mean of its
/// member node features.
pub fn make_hyperclasses(cliques: &CliqueSet, features: &FeatureMatrix) -> Vec<HyperClass> {
    let dim = features.dim();
    cliques
        .iter()
        .map(|members| {
            let mut acc = vec![0.0; dim];
            for &m in members {
                for (a, x) in acc.iter_mut().zip(features.row(m)) {
                    *a += x;
                }
            }
            let n = members.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            // members cancelling exactly: keep the first member's direction
            let center = normalized(&acc).unwrap_or_else(|_| features.row(members[0]).to_vec());
            HyperClass {
                members: members.clone(),
                center: FeatureVector::new(center, features.space()),
            }
        })
        .collect()
}

/// Hyper-class indices by descending affinity to `query`; equal
/// affinities keep ascending clique order.
pub fn rank_by_affinity(query: &FeatureVector, hyper: &[HyperClass]) -> Result<Vec<usize>> {
    let mut scored = Vec::with_capacity(hyper.len());
    for (i, h) in hyper.iter().enumerate() {
        query.check_compatible(&h.center)?;
        scored.push((i, dot(query.values(), h.center.values())));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Number of hyper-classes kept for a ratio `r` out of `m`: `ceil(r · m)`.
pub fn selection_count(r: f64, m: usize) -> usize {
    // absorb representation error such as 0.1 * 30 = 3.0000000000000004
    let k = (r * m as f64 - 1e-9).ceil() as usize;
    k.clamp(1, m)
}

/// Leading `ceil(r · m)` entries of a ranking.
pub fn select_top_r(ranked: &[usize], r: f64) -> Result<Vec<usize>> {
    if ranked.is_empty() {
        return Err(Error::EmptyCliqueSet);
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::param("r", format!("{r} not in (0, 1]")));
    }
    Ok(ranked[..selection_count(r, ranked.len())].to_vec())
}

/// Marks every node covered by a selected clique.
pub fn build_mask(selected: &[usize], cliques: &CliqueSet, n_nodes: usize) -> InlierMask {
    let mut bits = vec![false; n_nodes];
    for &s in selected {
        for &node in &cliques.cliques[s] {
            bits[node] = true;
        }
    }
    InlierMask { bits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Space;

    fn feats(rows: &[&[f64]]) -> FeatureMatrix {
        let dim = rows[0].len();
        let mut m = FeatureMatrix::empty(dim, Space::Css);
        for r in rows {
            m.push_values(&normalized(r).unwrap()).unwrap();
        }
        m
    }

    fn cliques(c: &[&[usize]]) -> CliqueSet {
        CliqueSet {
            cliques: c.iter().map(|x| x.to_vec()).collect(),
        }
    }

    #[test]
    fn hyperclass_centers() {
        let f = feats(&[&[1.0, 0.0], &[0.0, 1.0], &[0.6, 0.8]]);
        let h = make_hyperclasses(&cliques(&[&[2], &[0, 1]]), &f);
        assert_eq!(h[0].center.values(), f.row(2));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((h[1].center.values()[0] - s).abs() < 1e-12);
        assert!((h[1].center.values()[1] - s).abs() < 1e-12);

        let same = feats(&[&[0.6, 0.8], &[0.6, 0.8], &[0.6, 0.8]]);
        let h = make_hyperclasses(&cliques(&[&[0, 1, 2]]), &same);
        assert!((h[0].center.values()[0] - 0.6).abs() < 1e-12);
    }

    fn hyper(centers: &[&[f64]]) -> Vec<HyperClass> {
        centers
            .iter()
            .enumerate()
            .map(|(i, c)| HyperClass {
                members: vec![i],
                center: FeatureVector::new(c.to_vec(), Space::Css),
            })
            .collect()
    }

    #[test]
    fn ranking() {
        let h = hyper(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let q = FeatureVector::new(vec![0.0, 1.0], Space::Css);
        assert_eq!(rank_by_affinity(&q, &h).unwrap(), vec![1, 0]);

        // cosines 0.2 and 0.9 against q = [1, 0]
        let a = (1.0f64 - 0.04).sqrt();
        let b = (1.0f64 - 0.81).sqrt();
        let h = hyper(&[&[0.2, a], &[0.9, b]]);
        let q = FeatureVector::new(vec![1.0, 0.0], Space::Css);
        assert_eq!(rank_by_affinity(&q, &h).unwrap(), vec![1, 0]);

        // cosines 0.5, 0.5, 0.1: tie keeps clique order
        let c = (1.0f64 - 0.25).sqrt();
        let d = (1.0f64 - 0.01).sqrt();
        let h = hyper(&[&[0.5, c], &[0.5, -c], &[0.1, d]]);
        assert_eq!(rank_by_affinity(&q, &h).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn ranking_rejects_dimension_mismatch() {
        let h = hyper(&[&[1.0, 0.0]]);
        let q = FeatureVector::new(vec![1.0, 0.0, 0.0], Space::Css);
        assert!(matches!(
            rank_by_affinity(&q, &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn top_r_counts() {
        let ranked: Vec<usize> = (0..7).collect();
        assert_eq!(select_top_r(&ranked, 0.2).unwrap(), vec![0, 1]);
        assert_eq!(select_top_r(&[4, 3, 2, 1, 0], 1.0).unwrap(), vec![4, 3, 2, 1, 0]);
        assert_eq!(select_top_r(&[5], 0.2).unwrap(), vec![5]);
        assert_eq!(selection_count(0.1, 30), 3);
        assert!(matches!(select_top_r(&[], 0.2), Err(Error::EmptyCliqueSet)));
        assert!(select_top_r(&[0], 0.0).is_err());
    }

    #[test]
    fn masks() {
        let cs = cliques(&[&[0, 1], &[1, 2], &[3]]);
        assert_eq!(build_mask(&[0, 1], &cs, 4).bits, vec![true, true, true, false]);
        assert_eq!(build_mask(&[2], &cs, 4).bits, vec![false, false, false, true]);
        assert_eq!(build_mask(&[0, 1, 2], &cs, 4), InlierMask::all(4));
    }
}
