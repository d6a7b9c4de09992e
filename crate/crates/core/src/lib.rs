//! Training-free test-time adaptation over precomputed embeddings.
//!
//! A zero-shot classifier's predictions are refined over a stream of test
//! samples using entropy-gated feature caches in two embedding spaces,
//! thresholded affinity graphs over class centers, maximal-clique
//! hyper-classes that mask out unlikely classes, and a weighted fusion of
//! the resulting score vectors.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod hyperclass;
pub mod io;
pub mod math;
pub mod pipeline;
pub mod predict;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use math::{FeatureMatrix, FeatureVector, PredictionKind, PredictionVector, Space};
pub use pipeline::{run_stream, Dataset, Engine, EngineConfig, LabeledSample, StreamResult};
