//! Synthetic dual-space classification streams.
//!
//! Class means in the shared space double as text features; test samples
//! are drawn around rotated copies of those means, so a cache that learns
//! the shifted geometry beats the zero-shot classifier. The auxiliary
//! space has its own unrelated means and typically tighter clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, normalized, FeatureMatrix, FeatureVector, Space};
use crate::pipeline::{Dataset, LabeledSample};
use crate::predict::ViewBatch;

const MAX_PLACEMENT_TRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub k: usize,
    pub d1: usize,
    pub d2: usize,
    pub samples: usize,
    /// Per-coordinate Gaussian std in the shared space, before renormalizing.
    pub css_noise: f64,
    pub afv_noise: f64,
    /// Rotation applied to every shared-space class mean at test time.
    pub shift_angle: f64,
    pub views_per_sample: usize,
    /// Augmented views are redrawn around the sample with this fraction of
    /// the sample noise.
    pub view_noise_scale: f64,
    /// Fraction of emitted ground-truth labels replaced by a wrong class.
    pub label_noise: f64,
    /// Upper bound on pairwise cosine between class means.
    pub max_mean_cosine: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            k: 10,
            d1: 32,
            d2: 32,
            samples: 1000,
            css_noise: 0.08,
            afv_noise: 0.05,
            shift_angle: 1.2,
            views_per_sample: 8,
            view_noise_scale: 0.5,
            label_noise: 0.0,
            max_mean_cosine: 0.8,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "need at least one class"));
        }
        if self.d1 < 2 || self.d2 < 2 {
            return Err(Error::param("d1/d2", "dimensions must be at least 2"));
        }
        if self.views_per_sample == 0 {
            return Err(Error::param("views_per_sample", "must be at least 1"));
        }
        for (name, v) in [
            ("css_noise", self.css_noise),
            ("afv_noise", self.afv_noise),
            ("view_noise_scale", self.view_noise_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be finite and nonnegative"));
            }
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::param("label_noise", "must lie in [0, 1)"));
        }
        if !self.shift_angle.is_finite() {
            return Err(Error::param("shift_angle", "must be finite"));
        }
        Ok(())
    }
}

/// Generated stream with both the emitted and the clean labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub dataset: Dataset,
    pub clean_labels: Vec<usize>,
    pub css_means: FeatureMatrix,
    pub afv_means: FeatureMatrix,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        if let Ok(v) = normalized(&gaussian(rng, dim)) {
            return v;
        }
    }
}

/// Random unit means with every pairwise cosine below `cap`.
fn place_means(rng: &mut ChaCha8Rng, k: usize, dim: usize, cap: f64) -> Result<Vec<Vec<f64>>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut tries = 0;
    while means.len() < k {
        if tries >= MAX_PLACEMENT_TRIES {
            return Err(Error::InfeasibleSpec(format!(
                "placed {} of {k} means in {dim} dims under cosine {cap}",
                means.len()
            )));
        }
        tries += 1;
        let v = random_unit(rng, dim);
        if means.iter().all(|m| dot(m, &v) < cap) {
            means.push(v);
        }
    }
    Ok(means)
}

/// Rotates `mean` by `angle` toward a random direction orthogonal to it.
fn rotate(rng: &mut ChaCha8Rng, mean: &[f64], angle: f64) -> Vec<f64> {
    let dir = loop {
        let g = gaussian(rng, mean.len());
        let p = dot(&g, mean);
        let ortho: Vec<f64> = g.iter().zip(mean).map(|(x, m)| x - p * m).collect();
        if let Ok(u) = normalized(&ortho) {
            break u;
        }
    };
    let (s, c) = angle.sin_cos();
    mean.iter().zip(&dir).map(|(m, u)| c * m + s * u).collect()
}

fn jitter(rng: &mut ChaCha8Rng, center: &[f64], std: f64) -> Vec<f64> {
    let noisy: Vec<f64> = center
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(rng);
            c + std * z
        })
        .collect();
    normalized(&noisy).unwrap_or_else(|_| center.to_vec())
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let css_means = place_means(&mut rng, spec.k, spec.d1, spec.max_mean_cosine)?;
    let afv_means = place_means(&mut rng, spec.k, spec.d2, spec.max_mean_cosine)?;
    let shifted: Vec<Vec<f64>> = css_means
        .iter()
        .map(|m| rotate(&mut rng, m, spec.shift_angle))
        .collect();

    let css_view_std = spec.css_noise * spec.view_noise_scale;
    let afv_view_std = spec.afv_noise * spec.view_noise_scale;
    let mut samples = Vec::with_capacity(spec.samples);
    let mut clean_labels = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let y = rng.random_range(0..spec.k);
        let css_point = jitter(&mut rng, &shifted[y], spec.css_noise);
        let afv_point = jitter(&mut rng, &afv_means[y], spec.afv_noise);
        let mut css = vec![FeatureVector::new(css_point.clone(), Space::Css)];
        let mut afv = vec![FeatureVector::new(afv_point.clone(), Space::Afv)];
        for _ in 1..spec.views_per_sample {
            css.push(FeatureVector::new(
                jitter(&mut rng, &css_point, css_view_std),
                Space::Css,
            ));
            afv.push(FeatureVector::new(
                jitter(&mut rng, &afv_point, afv_view_std),
                Space::Afv,
            ));
        }
        let emitted = if spec.k > 1 && rng.random_bool(spec.label_noise) {
            let wrong = rng.random_range(0..spec.k - 1);
            if wrong >= y {
                wrong + 1
            } else {
                wrong
            }
        } else {
            y
        };
        clean_labels.push(y);
        samples.push(LabeledSample {
            views: ViewBatch::new(css, afv)?,
            label: emitted,
        });
    }

    let to_matrix = |rows: &[Vec<f64>], dim, space| {
        let mut m = FeatureMatrix::empty(dim, space);
        for r in rows {
            m.push_values(r)?;
        }
        Ok::<_, Error>(m)
    };
    let text_features = to_matrix(&css_means, spec.d1, Space::Css)?;
    Ok(SynthData {
        dataset: Dataset {
            class_names: (0..spec.k).map(|i| format!("class_{i:03}")).collect(),
            text_features,
            afv_dim: spec.d2,
            samples,
        },
        clean_labels,
        css_means: to_matrix(&shifted, spec.d1, Space::Css)?,
        afv_means: to_matrix(&afv_means, spec.d2, Space::Afv)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::zero_shot;

    fn zs_accuracy(data: &SynthData) -> f64 {
        let ds = &data.dataset;
        let hits = ds
            .samples
            .iter()
            .filter(|s| {
                zero_shot(s.views.original_css(), &ds.text_features, 0.01)
                    .unwrap()
                    .argmax()
                    == s.label
            })
            .count();
        hits as f64 / ds.samples.len() as f64
    }

    #[test]
    fn noiseless_unshifted_stream_is_trivial() {
        let spec = SynthSpec {
            css_noise: 0.0,
            shift_angle: 0.0,
            samples: 200,
            ..SynthSpec::default()
        };
        assert_eq!(zs_accuracy(&generate(&spec).unwrap()), 1.0);
    }

    #[test]
    fn two_opposite_poles() {
        let spec = SynthSpec {
            k: 2,
            d1: 2,
            d2: 2,
            css_noise: 0.05,
            shift_angle: 0.0,
            samples: 500,
            // in the plane, a cap of -0.99 forces the means to near-opposite poles
            max_mean_cosine: -0.99,
            ..SynthSpec::default()
        };
        let data = generate(&spec).unwrap();
        let t = &data.dataset.text_features;
        assert!(dot(t.row(0), t.row(1)) < -0.99);
        assert!(zs_accuracy(&data) > 0.99);
    }

    #[test]
    fn all_features_unit() {
        let data = generate(&SynthSpec {
            samples: 50,
            ..SynthSpec::default()
        })
        .unwrap();
        for s in &data.dataset.samples {
            for v in s.views.css.iter().chain(&s.views.afv) {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            assert_eq!(s.views.len(), 8);
        }
        for r in data.dataset.text_features.iter_rows() {
            assert!((crate::math::norm(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec {
            samples: 30,
            seed: 7,
            ..SynthSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 8, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn label_noise_only_touches_emitted_labels() {
        let spec = SynthSpec {
            samples: 400,
            label_noise: 0.25,
            ..SynthSpec::default()
        };
        let data = generate(&spec).unwrap();
        let flipped = data
            .dataset
            .samples
            .iter()
            .zip(&data.clean_labels)
            .filter(|(s, &c)| s.label != c)
            .count();
        assert!((60..140).contains(&flipped), "{flipped}");
    }

    #[test]
    fn infeasible_cap() {
        let spec = SynthSpec {
            k: 5,
            d1: 2,
            max_mean_cosine: -0.9,
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn larger_shift_degrades_zero_shot() {
        let mut prev = f64::INFINITY;
        for angle in [0.0, 0.6, 1.2] {
            let mean: f64 = (0..5)
                .map(|seed| {
                    zs_accuracy(
                        &generate(&SynthSpec {
                            shift_angle: angle,
                            samples: 300,
                            seed,
                            ..SynthSpec::default()
                        })
                        .unwrap(),
                    )
                })
                .sum::<f64>()
                / 5.0;
            assert!(mean <= prev, "angle {angle}: {mean} > {prev}");
            prev = mean;
        }
    }
}
