//! On-disk formats: binary feature files, label files, dataset manifests,
//! JSON reports, engine state dumps and graph dumps.
//!
//! Feature files are a 16-byte header followed by little-endian `f32`
//! rows:
//!
//! ```text
//! 0  magic  b"CSMF"
//! 4  u16    version (1)
//! 6  u8     space tag (0 = css, 1 = afv)
//! 7  u8     dtype (0 = f32)
//! 8  u32    dim
//! 12 u32    count
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::cache::{CacheEntry, ClassCache, DualCache};
use crate::error::{Error, Result};
use crate::graph::{GraphOrder, ThresholdSchedule};
use crate::math::{norm, FeatureMatrix, FeatureVector, Space, UNIT_NORM_TOL};
use crate::pipeline::{
    Dataset, Engine, EngineConfig, EngineParts, GraphSeed, LabeledSample, PathAccuracy,
    PathCounts, SampleRecord, StreamResult,
};
use crate::predict::ViewBatch;

pub const MAGIC: [u8; 4] = *b"CSMF";
pub const FEATURE_FILE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const DTYPE_F32: u8 = 0;
pub const STATE_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

/// Parsed feature-file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureHeader {
    pub version: u16,
    pub space: Space,
    pub dtype: u8,
    pub dim: u32,
    pub count: u32,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn f32_le_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn f32_le_values(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

/// Serializes a matrix as a feature file. Values are narrowed to `f32`.
pub fn encode_feature_file(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let dim = u32::try_from(m.dim()).map_err(|_| Error::param("dim", "exceeds u32"))?;
    let count = u32::try_from(m.rows()).map_err(|_| Error::param("count", "exceeds u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_flat().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FEATURE_FILE_VERSION.to_le_bytes());
    out.push(m.space().tag());
    out.push(DTYPE_F32);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&f32_le_bytes(m.as_flat()));
    Ok(out)
}

/// Parses the 16-byte header. `path` only labels errors.
pub fn decode_header(bytes: &[u8], path: &Path) -> Result<FeatureHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: magic,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_FILE_VERSION {
        return Err(Error::VersionUnsupported {
            path: path.into(),
            found: version.into(),
        });
    }
    let space = Space::from_tag(bytes[6])
        .ok_or_else(|| Error::SchemaMismatch(format!("unknown space tag {}", bytes[6])))?;
    let dtype = bytes[7];
    if dtype != DTYPE_F32 {
        return Err(Error::SchemaMismatch(format!("unsupported dtype {dtype}")));
    }
    let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    Ok(FeatureHeader {
        version,
        space,
        dtype,
        dim: u32_at(8),
        count: u32_at(12),
    })
}

/// Parses and validates a whole feature file.
pub fn decode_feature_file(bytes: &[u8], path: &Path) -> Result<(FeatureHeader, FeatureMatrix)> {
    let header = decode_header(bytes, path)?;
    let payload = header.dim as u64 * header.count as u64 * 4;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found < payload {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: payload,
            found,
        });
    }
    if found > payload {
        return Err(Error::SchemaMismatch(format!(
            "{}: {} trailing bytes after payload",
            path.display(),
            found - payload
        )));
    }
    if header.dim == 0 && header.count > 0 {
        return Err(Error::SchemaMismatch("zero-dimensional vectors".into()));
    }
    let values = f32_le_values(&bytes[HEADER_LEN..]);
    let m = FeatureMatrix::from_flat(header.dim.max(1) as usize, header.space, values)?;
    for (index, row) in m.iter_rows().enumerate() {
        let n = norm(row);
        if !((n - 1.0).abs() <= UNIT_NORM_TOL) {
            return Err(Error::NonUnitVectors {
                path: path.into(),
                index,
                norm: n,
            });
        }
    }
    Ok((header, m))
}

pub fn write_feature_file(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    write_bytes(path.as_ref(), &encode_feature_file(m)?)
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<(FeatureHeader, FeatureMatrix)> {
    let path = path.as_ref();
    decode_feature_file(&read_bytes(path)?, path)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut out = Vec::with_capacity(labels.len() * 4);
    for &l in labels {
        let l = u32::try_from(l).map_err(|_| Error::param("label", "exceeds u32"))?;
        out.extend_from_slice(&l.to_le_bytes());
    }
    write_bytes(path.as_ref(), &out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: bytes.len().next_multiple_of(4) as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect())
}

/// Dataset description; paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub k: usize,
    pub class_names: Vec<String>,
    pub text_features: PathBuf,
    pub css_stream: PathBuf,
    pub afv_stream: PathBuf,
    pub labels: PathBuf,
    pub views_per_sample: usize,
    /// Inputs the producer could not encode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(serde_json::from_slice(&read_bytes(path)?)?)
    }
}

fn expect_space(m: &FeatureMatrix, space: Space, what: &str) -> Result<()> {
    if m.space() != space {
        return Err(Error::SchemaMismatch(format!(
            "{what} is tagged {}, expected {}",
            m.space().name(),
            space.name()
        )));
    }
    Ok(())
}

/// Loads and cross-checks every file a manifest points to.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let (_, text) = read_feature_file(base.join(&manifest.text_features))?;
    let (_, css) = read_feature_file(base.join(&manifest.css_stream))?;
    let (_, afv) = read_feature_file(base.join(&manifest.afv_stream))?;
    let labels = read_labels(base.join(&manifest.labels))?;
    assemble_dataset(&manifest, text, css, afv, labels)
}

/// Checks manifest arithmetic and groups stream rows into samples.
pub fn assemble_dataset(
    manifest: &Manifest,
    text: FeatureMatrix,
    css: FeatureMatrix,
    afv: FeatureMatrix,
    labels: Vec<usize>,
) -> Result<Dataset> {
    let v = manifest.views_per_sample;
    let mismatch = |msg: String| Err(Error::SchemaMismatch(msg));
    if v == 0 {
        return mismatch("views_per_sample must be at least 1".into());
    }
    expect_space(&text, Space::Css, "text_features")?;
    expect_space(&css, Space::Css, "css_stream")?;
    expect_space(&afv, Space::Afv, "afv_stream")?;
    if text.rows() != manifest.k {
        return mismatch(format!("k = {} but {} text features", manifest.k, text.rows()));
    }
    if manifest.class_names.len() != manifest.k {
        return mismatch(format!(
            "k = {} but {} class names",
            manifest.k,
            manifest.class_names.len()
        ));
    }
    if text.dim() != css.dim() && !css.is_empty() {
        return mismatch(format!(
            "text dim {} differs from css stream dim {}",
            text.dim(),
            css.dim()
        ));
    }
    if css.rows() != afv.rows() {
        return mismatch(format!(
            "css stream has {} vectors, afv stream {}",
            css.rows(),
            afv.rows()
        ));
    }
    if !css.rows().is_multiple_of(v) {
        return mismatch(format!(
            "{} stream vectors not divisible by {v} views",
            css.rows()
        ));
    }
    let n = css.rows() / v;
    if labels.len() != n {
        return mismatch(format!("{} labels for {n} samples", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= manifest.k) {
        return mismatch(format!("label {bad} outside {} classes", manifest.k));
    }
    let mut samples = Vec::with_capacity(n);
    for (s, &label) in labels.iter().enumerate() {
        let rows = s * v..(s + 1) * v;
        let views = ViewBatch::new(
            rows.clone().map(|i| css.row_vector(i)).collect(),
            rows.map(|i| afv.row_vector(i)).collect(),
        )?;
        samples.push(LabeledSample { views, label });
    }
    Ok(Dataset {
        class_names: manifest.class_names.clone(),
        text_features: text,
        afv_dim: afv.dim(),
        samples,
    })
}

/// Writes a dataset as a manifest plus feature and label files under
/// `dir`; returns the manifest path.
pub fn write_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let v = ds.samples.first().map_or(1, |s| s.views.len());
    if let Some(s) = ds.samples.iter().find(|s| s.views.len() != v) {
        return Err(Error::SchemaMismatch(format!(
            "samples carry {} and {v} views",
            s.views.len()
        )));
    }
    let d2 = ds.afv_dim;
    let mut css = FeatureMatrix::empty(ds.text_features.dim(), Space::Css);
    let mut afv = FeatureMatrix::empty(d2, Space::Afv);
    for s in &ds.samples {
        for x in &s.views.css {
            css.push(x)?;
        }
        for x in &s.views.afv {
            afv.push(x)?;
        }
    }
    let manifest = Manifest {
        k: ds.classes(),
        class_names: ds.class_names.clone(),
        text_features: "text.csmf".into(),
        css_stream: "css.csmf".into(),
        afv_stream: "afv.csmf".into(),
        labels: "labels.u32".into(),
        views_per_sample: v,
        skipped: Vec::new(),
    };
    write_feature_file(dir.join(&manifest.text_features), &ds.text_features)?;
    write_feature_file(dir.join(&manifest.css_stream), &css)?;
    write_feature_file(dir.join(&manifest.afv_stream), &afv)?;
    let labels: Vec<usize> = ds.samples.iter().map(|s| s.label).collect();
    write_labels(dir.join(&manifest.labels), &labels)?;
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// JSON with object keys sorted, so equal values serialize to equal bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

/// Writes `value` as pretty-printed canonical JSON.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    write_bytes(path.as_ref(), s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

/// Accuracy report of one stream run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub samples: usize,
    pub accuracy: PathAccuracy,
    pub correct: PathCounts,
    pub config: EngineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<SampleRecord>>,
}

impl Report {
    pub fn new(config: &EngineConfig, result: &StreamResult, with_records: bool) -> Self {
        Self {
            version: REPORT_VERSION,
            samples: result.samples,
            accuracy: result.accuracy,
            correct: result.correct,
            config: config.clone(),
            records: with_records.then(|| result.records.clone()),
        }
    }
}

/// Base64 of the little-endian `f32` encoding of `values`.
pub fn encode_f32_b64(values: &[f64]) -> String {
    B64.encode(f32_le_bytes(values))
}

pub fn decode_f32_b64(s: &str) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(s)
        .map_err(|e| Error::SchemaMismatch(format!("bad base64 payload: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::SchemaMismatch(format!(
            "base64 payload of {} bytes is not a whole number of f32 values",
            bytes.len()
        )));
    }
    Ok(f32_le_values(&bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub space: Space,
    pub dim: usize,
    pub rows: usize,
    pub data: String,
}

impl EncodedMatrix {
    pub fn encode(m: &FeatureMatrix) -> Self {
        Self {
            space: m.space(),
            dim: m.dim(),
            rows: m.rows(),
            data: encode_f32_b64(m.as_flat()),
        }
    }

    pub fn decode(&self) -> Result<FeatureMatrix> {
        let values = decode_f32_b64(&self.data)?;
        if values.len() != self.dim * self.rows {
            return Err(Error::SchemaMismatch(format!(
                "matrix payload holds {} values, header says {}x{}",
                values.len(),
                self.rows,
                self.dim
            )));
        }
        FeatureMatrix::from_flat(self.dim, self.space, values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedEntry {
    pub arrival_index: u64,
    pub entropy: f64,
    pub feature: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedClassCache {
    pub class: usize,
    pub capacity: usize,
    pub entries: Vec<EncodedEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub css: ThresholdSchedule,
    pub afv: ThresholdSchedule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedQuery {
    pub css: String,
    pub afv: String,
}

/// Node set a graph was last built over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedGraph {
    pub nodes: EncodedMatrix,
    pub node_classes: Vec<usize>,
    pub threshold: f64,
    pub built_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedGraphs {
    pub css: EncodedGraph,
    pub afv: EncodedGraph,
}

/// Versioned snapshot of an engine mid-stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub version: u32,
    pub config: EngineConfig,
    pub text_features: EncodedMatrix,
    pub css_cache: Vec<EncodedClassCache>,
    pub afv_cache: Vec<EncodedClassCache>,
    pub threshold_state: ThresholdState,
    pub sample_count: u64,
    pub last_query: Option<EncodedQuery>,
    pub graphs: EncodedGraphs,
}

fn encode_caches(caches: &[ClassCache]) -> Vec<EncodedClassCache> {
    caches
        .iter()
        .map(|c| EncodedClassCache {
            class: c.class_id(),
            capacity: c.capacity(),
            entries: c
                .entries()
                .iter()
                .map(|e| EncodedEntry {
                    arrival_index: e.arrival_index,
                    entropy: e.entropy,
                    feature: encode_f32_b64(e.feature.values()),
                })
                .collect(),
        })
        .collect()
}

fn decode_caches(
    encoded: &[EncodedClassCache],
    target: &mut [ClassCache],
    space: Space,
) -> Result<()> {
    if encoded.len() != target.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} {} caches for {} classes",
            encoded.len(),
            space.name(),
            target.len()
        )));
    }
    for (i, (enc, cache)) in encoded.iter().zip(target.iter_mut()).enumerate() {
        if enc.class != i || enc.capacity != cache.capacity() {
            return Err(Error::SchemaMismatch(format!(
                "{} cache {i}: class {} capacity {} does not match config capacity {}",
                space.name(),
                enc.class,
                enc.capacity,
                cache.capacity()
            )));
        }
        let entries = enc
            .entries
            .iter()
            .map(|e| {
                Ok(CacheEntry {
                    feature: FeatureVector::new(decode_f32_b64(&e.feature)?, space),
                    entropy: e.entropy,
                    arrival_index: e.arrival_index,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cache.restore(entries)?;
    }
    Ok(())
}

fn encode_graph(g: &crate::pipeline::SpaceGraph) -> EncodedGraph {
    let seed = GraphSeed::from(g);
    EncodedGraph {
        nodes: EncodedMatrix::encode(&seed.nodes),
        node_classes: seed.node_classes,
        threshold: seed.threshold,
        built_at: seed.built_at,
    }
}

fn decode_graph(g: &EncodedGraph) -> Result<GraphSeed> {
    let nodes = g.nodes.decode()?;
    if nodes.rows() != g.node_classes.len() {
        return Err(Error::SchemaMismatch(format!(
            "graph has {} nodes but {} node classes",
            nodes.rows(),
            g.node_classes.len()
        )));
    }
    Ok(GraphSeed {
        nodes,
        node_classes: g.node_classes.clone(),
        threshold: g.threshold,
        built_at: g.built_at,
    })
}

impl StateDump {
    pub fn capture(engine: &Engine) -> Self {
        let (css_schedule, afv_schedule) = engine.schedules();
        let caches = engine.caches();
        Self {
            version: STATE_VERSION,
            config: engine.config().clone(),
            text_features: EncodedMatrix::encode(engine.text_features()),
            css_cache: encode_caches(&caches.css),
            afv_cache: encode_caches(&caches.afv),
            threshold_state: ThresholdState {
                css: css_schedule,
                afv: afv_schedule,
            },
            sample_count: engine.samples_seen(),
            last_query: engine.last_query().map(|(c, a)| EncodedQuery {
                css: encode_f32_b64(c.values()),
                afv: encode_f32_b64(a.values()),
            }),
            graphs: EncodedGraphs {
                css: encode_graph(engine.css_graph().expect("built at construction")),
                afv: encode_graph(engine.afv_graph().expect("built at construction")),
            },
        }
    }

    /// Reconstructs the engine. Feature values come back rounded to `f32`.
    pub fn into_engine(self) -> Result<Engine> {
        let cfg = self.config;
        let text = self.text_features.decode()?;
        let k = text.rows();
        let (Some(ck), Some(d1), Some(d2)) = (cfg.k, cfg.d1, cfg.d2) else {
            return Err(Error::SchemaMismatch("state config lacks k, d1 or d2".into()));
        };
        if ck != k || d1 != text.dim() {
            return Err(Error::SchemaMismatch(format!(
                "config says k={ck}, d1={d1}; text features are {k}x{}",
                text.dim()
            )));
        }
        let mut caches = DualCache::new(k, d1, d2, cfg.l1, cfg.l2)?;
        decode_caches(&self.css_cache, &mut caches.css, Space::Css)?;
        decode_caches(&self.afv_cache, &mut caches.afv, Space::Afv)?;
        let last_query = self
            .last_query
            .map(|q| {
                Ok::<_, Error>((
                    FeatureVector::new(decode_f32_b64(&q.css)?, Space::Css),
                    FeatureVector::new(decode_f32_b64(&q.afv)?, Space::Afv),
                ))
            })
            .transpose()?;
        Engine::restore(EngineParts {
            config: cfg,
            text,
            caches,
            schedules: (self.threshold_state.css, self.threshold_state.afv),
            samples_seen: self.sample_count,
            last_query,
            css_graph: decode_graph(&self.graphs.css)?,
            afv_graph: decode_graph(&self.graphs.afv)?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw: serde_json::Value = read_json(path)?;
        let version = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::SchemaMismatch("state dump has no version".into()))?;
        if version != u64::from(STATE_VERSION) {
            return Err(Error::VersionUnsupported {
                path: path.into(),
                found: u32::try_from(version).unwrap_or(u32::MAX),
            });
        }
        Ok(serde_json::from_value(raw)?)
    }
}

/// Serialized graph of one space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub space: Space,
    pub n: usize,
    /// Edges of the graph the cliques were searched on, `i < j`.
    pub edges: Vec<[usize; 2]>,
    pub first_order_edges: Vec<[usize; 2]>,
    pub threshold: f64,
    pub order: GraphOrder,
    pub cliques: Vec<Vec<usize>>,
    pub node_classes: Vec<usize>,
    pub built_at: u64,
}

impl GraphDump {
    pub fn capture(engine: &Engine, space: Space) -> Self {
        let g = match space {
            Space::Css => engine.css_graph(),
            Space::Afv => engine.afv_graph(),
        }
        .expect("built at construction");
        let pairs = |a: &crate::graph::Adjacency| a.edges().into_iter().map(|(i, j)| [i, j]).collect();
        Self {
            space,
            n: g.fog.node_count(),
            edges: pairs(&g.searched().adjacency),
            first_order_edges: pairs(&g.fog.adjacency),
            threshold: g.fog.threshold,
            order: g.order,
            cliques: g.cliques.cliques.clone(),
            node_classes: g.node_classes.clone(),
            built_at: g.built_at,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_matrix(space: Space) -> FeatureMatrix {
        let rows = [[0.6, 0.8, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let mut m = FeatureMatrix::empty(3, space);
        for r in rows {
            m.push_values(&r).unwrap();
        }
        m
    }

    #[test]
    fn header_layout() {
        let bytes = encode_feature_file(&small_matrix(Space::Afv)).unwrap();
        assert_eq!(&bytes[..4], b"CSMF");
        assert_eq!(bytes[4..6], [1, 0]);
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 0);
        assert_eq!(bytes[8..12], [3, 0, 0, 0]);
        assert_eq!(bytes[12..16], [3, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 9 * 4);
    }

    #[test]
    fn bad_magic_and_version() {
        let p = Path::new("x.csmf");
        let mut bytes = encode_feature_file(&small_matrix(Space::Css)).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_feature_file(&bytes, p), Err(Error::BadMagic { found, .. }) if &found == b"XXXX"));

        let mut bytes = encode_feature_file(&small_matrix(Space::Css)).unwrap();
        bytes[4] = 2;
        assert!(matches!(
            decode_feature_file(&bytes, p),
            Err(Error::VersionUnsupported { found: 2, .. })
        ));
    }

    #[test]
    fn truncation() {
        let p = Path::new("x.csmf");
        let bytes = encode_feature_file(&small_matrix(Space::Css)).unwrap();
        assert!(matches!(
            decode_feature_file(&bytes[..bytes.len() - 1], p),
            Err(Error::TruncatedPayload { expected: 36, found: 35, .. })
        ));
        assert!(matches!(
            decode_feature_file(&bytes[..10], p),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn non_unit_rows_rejected() {
        let m = FeatureMatrix::from_flat(2, Space::Css, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
        let bytes = encode_feature_file(&m).unwrap();
        assert!(matches!(
            decode_feature_file(&bytes, Path::new("x")),
            Err(Error::NonUnitVectors { index: 1, .. })
        ));
    }

    #[test]
    fn base64_roundtrip() {
        let v = [0.25, -1.5, 3.0];
        assert_eq!(decode_f32_b64(&encode_f32_b64(&v)).unwrap(), v);
        assert!(decode_f32_b64("AAA=").is_err());
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let v = serde_json::json!({"b": 1, "a": {"d": 2, "c": 3}});
        assert_eq!(canonical_json(&v).unwrap(), r#"{"a":{"c":3,"d":2},"b":1}"#);
    }
}
