//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers and returns a JSON string; the logic lives in ordinary Rust
//! functions so it can be tested natively.

use cosmic::datagen::{generate, SynthData, SynthSpec};
use cosmic::graph::{build_fog, build_sog, maximal_cliques};
use cosmic::hyperclass::{build_mask, make_hyperclasses, rank_by_affinity, select_top_r};
use cosmic::predict::sweep_betas;
use cosmic::{Engine, EngineConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_SAMPLES: usize = 5000;
const MAX_CLASSES: usize = 20;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn small_spec(seed: u64, k: usize, samples: usize) -> Result<SynthSpec, String> {
    if !(2..=MAX_CLASSES).contains(&k) {
        return Err(format!("classes must lie in 2..={MAX_CLASSES}"));
    }
    if samples > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples"));
    }
    Ok(SynthSpec {
        k,
        samples,
        seed,
        ..SynthSpec::default()
    })
}

fn synth(spec: &SynthSpec) -> Result<SynthData, String> {
    generate(spec).map_err(err)
}

#[derive(Serialize)]
struct GraphView {
    n: usize,
    node_classes: Vec<usize>,
    /// `true` for visual-center nodes, `false` for text nodes.
    visual: Vec<bool>,
    first_order_edges: Vec<[usize; 2]>,
    second_order_edges: Vec<[usize; 2]>,
    cliques: Vec<Vec<usize>>,
    inliers: Vec<bool>,
    query_label: usize,
}

/// Shared-space graph after `warmup` samples, rebuilt at `threshold`,
/// with the inlier mask the next sample would receive.
pub fn graph_explorer_json(
    seed: u64,
    classes: usize,
    warmup: usize,
    threshold: f64,
    second_order: bool,
    r: f64,
) -> Result<String, String> {
    let data = synth(&small_spec(seed, classes, warmup + 1)?)?;
    let ds = &data.dataset;
    let mut engine = Engine::new(EngineConfig::default(), ds.text_features.clone(), Some(ds.afv_dim)).map_err(err)?;
    engine.run(&ds.samples[..warmup]).map_err(err)?;

    let next = &ds.samples[warmup];
    let query = next.views.original_css();
    let nodes = cosmic::predict::assemble_css_nodes(&ds.text_features, &engine.css_centers(Some(query)).map_err(err)?)
        .map_err(err)?;
    let fog = build_fog(&nodes, threshold).map_err(err)?;
    let sog = build_sog(&fog).map_err(err)?;
    let searched = if second_order { &sog } else { &fog };
    let cliques = maximal_cliques(&searched.adjacency);
    let hyper = make_hyperclasses(&cliques, &nodes);
    let ranked = rank_by_affinity(query, &hyper).map_err(err)?;
    let mask = build_mask(&select_top_r(&ranked, r).map_err(err)?, &cliques, nodes.rows());

    let pairs = |a: &cosmic::graph::Adjacency| a.edges().into_iter().map(|(i, j)| [i, j]).collect();
    let n = nodes.rows();
    let view = GraphView {
        n,
        node_classes: (0..n).map(|i| i % classes).collect(),
        visual: (0..n).map(|i| i >= classes).collect(),
        first_order_edges: pairs(&fog.adjacency),
        second_order_edges: pairs(&sog.adjacency),
        cliques: cliques.cliques,
        inliers: mask.bits,
        query_label: next.label,
    };
    serde_json::to_string(&view).map_err(err)
}

/// Per-path accuracy for one synthetic stream, with a running curve
/// sampled every `every` samples.
pub fn stream_json(
    seed: u64,
    samples: usize,
    shift_angle: f64,
    css_noise: f64,
    r: f64,
    afv_capacity: usize,
    every: usize,
) -> Result<String, String> {
    let spec = SynthSpec {
        shift_angle,
        css_noise,
        ..small_spec(seed, 10, samples)?
    };
    let data = synth(&spec)?;
    let ds = &data.dataset;
    let cfg = EngineConfig {
        r,
        l2: afv_capacity,
        ..EngineConfig::default()
    };
    let mut engine = Engine::new(cfg, ds.text_features.clone(), Some(ds.afv_dim)).map_err(err)?;
    let result = engine.run(&ds.samples).map_err(err)?;

    let every = every.max(1);
    let mut hits = [0usize; 5];
    let mut curve = Vec::new();
    for (i, rec) in result.records.iter().enumerate() {
        let p = rec.predicted;
        for (h, pred) in hits.iter_mut().zip([p.zero_shot, p.tda, p.css, p.afv, p.fused]) {
            *h += usize::from(pred == rec.label);
        }
        let seen = i + 1;
        if seen % every == 0 || seen == result.records.len() {
            let acc: Vec<f64> = hits.iter().map(|&h| h as f64 / seen as f64).collect();
            curve.push(json!({ "samples": seen, "accuracy": acc }));
        }
    }
    serde_json::to_string(&json!({
        "paths": ["zero_shot", "tda", "css", "afv", "fused"],
        "accuracy": result.accuracy,
        "curve": curve,
    }))
    .map_err(err)
}

/// Fusion-weight grid over one synthetic stream.
pub fn sweep_json(seed: u64, samples: usize, step: f64, max: f64) -> Result<String, String> {
    if max / step > 40.0 {
        return Err("grid too large: keep max / step at or below 40".into());
    }
    let data = synth(&small_spec(seed, 10, samples)?)?;
    let result = cosmic::run_stream(&EngineConfig::default(), &data.dataset).map_err(err)?;
    let sweep = sweep_betas(&result.scores, step, max).map_err(err)?;
    serde_json::to_string(&sweep).map_err(err)
}

#[wasm_bindgen]
pub fn graph_explorer(
    seed: u32,
    classes: u32,
    warmup: u32,
    threshold: f64,
    second_order: bool,
    r: f64,
) -> Result<String, JsValue> {
    graph_explorer_json(seed.into(), classes as usize, warmup as usize, threshold, second_order, r)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_stream(
    seed: u32,
    samples: u32,
    shift_angle: f64,
    css_noise: f64,
    r: f64,
    afv_capacity: u32,
    every: u32,
) -> Result<String, JsValue> {
    stream_json(
        seed.into(),
        samples as usize,
        shift_angle,
        css_noise,
        r,
        afv_capacity as usize,
        every as usize,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep(seed: u32, samples: u32, step: f64, max: f64) -> Result<String, JsValue> {
    sweep_json(seed.into(), samples as usize, step, max).map_err(|e| JsValue::from_str(&e))
}
