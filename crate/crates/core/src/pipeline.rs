//! Streaming adaptation engine.
//!
//! Per sample: entropy gate, cache admission under the pseudo-label,
//! periodic graph rebuild, hyper-class masks, the masked predictions, and
//! fusion. Accuracy is tracked for every prediction path.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cache::{
    afv_class_center, css_class_center, AfvCenterMode, AfvCenterParams, CacheEntry, DualCache,
    InsertOutcome,
};
use crate::error::{Error, Result};
use crate::graph::{
    build_fog, build_sog, maximal_cliques, AffinityGraph, CliqueSet, GraphOrder,
    ThresholdSchedule,
};
use crate::hyperclass::{
    build_mask, make_hyperclasses, rank_by_affinity, select_top_r, HyperClass, InlierMask,
};
use crate::math::{argmax, FeatureMatrix, FeatureVector, PredictionKind, PredictionVector, Space};
use crate::predict::{
    afv_prediction, GateOutput, assemble_css_nodes, css_prediction, fuse, marginal_entropy_gate, tda_adapted,
    zero_shot, FusionWeights, PathScores, ViewBatch,
};

/// Which zero-shot distribution enters the fusion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroShotSource {
    /// Mean over the confidence-selected views.
    #[default]
    GatedMean,
    /// The un-augmented view alone.
    OriginalView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Number of classes; inferred from the text features when absent.
    pub k: Option<usize>,
    /// Shared-space dimension; inferred when absent.
    pub d1: Option<usize>,
    /// Auxiliary-space dimension; inferred when absent.
    pub d2: Option<usize>,
    pub tau: f64,
    pub alpha: f64,
    pub l1: usize,
    pub l2: usize,
    pub t0: f64,
    pub g: f64,
    pub r: f64,
    pub view_ratio: f64,
    pub betas: FusionWeights,
    pub afv_center_mode: AfvCenterMode,
    /// Attention temperature for `attn_weighted` centers; `tau` when absent.
    pub attn_temperature: Option<f64>,
    pub ema_decay: f64,
    pub graph_update_interval: usize,
    pub graph_order: GraphOrder,
    /// Weight of the cache scores in the baseline path.
    pub tda_weight: f64,
    pub zero_shot_source: ZeroShotSource,
    /// Advance the threshold schedule on samples that were not cached.
    pub advance_on_reject: bool,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            k: None,
            d1: None,
            d2: None,
            tau: 0.01,
            alpha: 5.0,
            l1: 3,
            l2: 6,
            t0: 0.5,
            g: 0.0,
            r: 0.2,
            view_ratio: 0.1,
            betas: FusionWeights::default(),
            afv_center_mode: AfvCenterMode::Average,
            attn_temperature: None,
            ema_decay: 0.1,
            graph_update_interval: 1,
            graph_order: GraphOrder::Second,
            tda_weight: 1.0,
            zero_shot_source: ZeroShotSource::GatedMean,
            advance_on_reject: true,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::NonPositiveTemperature(self.tau));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if self.l1 == 0 || self.l2 == 0 {
            return Err(Error::param("l1/l2", "capacities must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.t0) {
            return Err(Error::param("t0", format!("{} outside [0, 1]", self.t0)));
        }
        if !(self.g >= 0.0) {
            return Err(Error::param("g", "growth must be nonnegative"));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::param("r", format!("{} not in (0, 1]", self.r)));
        }
        if !(self.view_ratio > 0.0 && self.view_ratio <= 1.0) {
            return Err(Error::param(
                "view_ratio",
                format!("{} not in (0, 1]", self.view_ratio),
            ));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay <= 1.0) {
            return Err(Error::param("ema_decay", "must lie in (0, 1]"));
        }
        if let Some(t) = self.attn_temperature {
            if !(t > 0.0) {
                return Err(Error::NonPositiveTemperature(t));
            }
        }
        if self.graph_update_interval == 0 {
            return Err(Error::param("graph_update_interval", "must be at least 1"));
        }
        if !(self.tda_weight >= 0.0) {
            return Err(Error::param("tda_weight", "must be nonnegative"));
        }
        self.betas.validate()
    }

    fn center_params(&self) -> AfvCenterParams {
        AfvCenterParams {
            attn_temperature: self.attn_temperature.unwrap_or(self.tau),
            ema_decay: self.ema_decay,
        }
    }
}

/// Graph state of one space as of its last rebuild.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceGraph {
    pub fog: AffinityGraph,
    pub sog: AffinityGraph,
    pub order: GraphOrder,
    pub cliques: CliqueSet,
    pub hyperclasses: Vec<HyperClass>,
    /// Class id of every graph node.
    pub node_classes: Vec<usize>,
    pub built_at: u64,
}

impl SpaceGraph {
    fn build(
        nodes: &FeatureMatrix,
        node_classes: Vec<usize>,
        threshold: f64,
        order: GraphOrder,
        built_at: u64,
    ) -> Result<Self> {
        let fog = build_fog(nodes, threshold)?;
        let sog = build_sog(&fog)?;
        let searched = match order {
            GraphOrder::First => &fog,
            GraphOrder::Second => &sog,
        };
        let cliques = maximal_cliques(&searched.adjacency);
        let hyperclasses = make_hyperclasses(&cliques, nodes);
        Ok(Self {
            fog,
            sog,
            order,
            cliques,
            hyperclasses,
            node_classes,
            built_at,
        })
    }

    /// The graph whose cliques drive the masks.
    pub fn searched(&self) -> &AffinityGraph {
        match self.order {
            GraphOrder::First => &self.fog,
            GraphOrder::Second => &self.sog,
        }
    }

    /// Node-space inlier mask for `query`, or `None` when the graph has no
    /// nodes.
    fn node_mask(&self, query: &FeatureVector, r: f64) -> Result<Option<InlierMask>> {
        if self.hyperclasses.is_empty() {
            return Ok(None);
        }
        let ranked = rank_by_affinity(query, &self.hyperclasses)?;
        let selected = select_top_r(&ranked, r)?;
        Ok(Some(build_mask(
            &selected,
            &self.cliques,
            self.node_classes.len(),
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheDecision {
    Inserted,
    Replaced,
    Rejected,
}

impl From<&InsertOutcome> for CacheDecision {
    fn from(o: &InsertOutcome) -> Self {
        match o {
            InsertOutcome::Inserted => CacheDecision::Inserted,
            InsertOutcome::Replaced(_) => CacheDecision::Replaced,
            InsertOutcome::Rejected => CacheDecision::Rejected,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPredictions {
    pub zero_shot: usize,
    pub tda: usize,
    pub css: usize,
    pub afv: usize,
    pub fused: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub label: usize,
    pub pseudo_label: usize,
    pub gate_entropy: f64,
    pub predicted: PathPredictions,
    pub css_cache: CacheDecision,
    pub afv_cache: CacheDecision,
    pub css_mask_size: usize,
    pub afv_mask_size: usize,
    pub css_cliques: usize,
    pub afv_cliques: usize,
    pub threshold: f64,
    pub graphs_rebuilt: bool,
}

/// Score vectors of every prediction path plus the masks behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub zero_shot: PredictionVector,
    /// Zero-shot plus weighted cache votes.
    pub tda: Vec<f64>,
    pub css: PredictionVector,
    pub afv: PredictionVector,
    pub fused: PredictionVector,
    pub css_mask: InlierMask,
    pub afv_mask: InlierMask,
}

/// Everything computed for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub record: SampleRecord,
    pub zero_shot: PredictionVector,
    pub tda: Vec<f64>,
    pub css: PredictionVector,
    pub afv: PredictionVector,
    pub fused: PredictionVector,
    pub css_mask: InlierMask,
    pub afv_mask: InlierMask,
}

impl SampleOutcome {
    pub fn path_scores(&self) -> PathScores {
        PathScores {
            zero_shot: self.zero_shot.scores.clone(),
            css: self.css.scores.clone(),
            afv: self.afv.scores.clone(),
            label: self.record.label,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathAccuracy {
    pub zero_shot: f64,
    pub tda: f64,
    pub css: f64,
    pub afv: f64,
    pub fused: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCounts {
    pub zero_shot: usize,
    pub tda: usize,
    pub css: usize,
    pub afv: usize,
    pub fused: usize,
}

impl PathCounts {
    fn add(&mut self, r: &SampleRecord) {
        let p = &r.predicted;
        self.zero_shot += usize::from(p.zero_shot == r.label);
        self.tda += usize::from(p.tda == r.label);
        self.css += usize::from(p.css == r.label);
        self.afv += usize::from(p.afv == r.label);
        self.fused += usize::from(p.fused == r.label);
    }

    pub fn accuracy(&self, n: usize) -> PathAccuracy {
        if n == 0 {
            return PathAccuracy::default();
        }
        let n = n as f64;
        PathAccuracy {
            zero_shot: self.zero_shot as f64 / n,
            tda: self.tda as f64 / n,
            css: self.css as f64 / n,
            afv: self.afv as f64 / n,
            fused: self.fused as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub samples: usize,
    pub correct: PathCounts,
    pub accuracy: PathAccuracy,
    pub records: Vec<SampleRecord>,
    #[serde(skip)]
    pub scores: Vec<PathScores>,
}

/// One labeled test sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub views: ViewBatch,
    pub label: usize,
}

/// Text features plus the labeled stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub text_features: FeatureMatrix,
    /// Auxiliary-space dimension, known even when the stream is empty.
    pub afv_dim: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn classes(&self) -> usize {
        self.text_features.rows()
    }
}

/// Node set and parameters a graph was last built from.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct GraphSeed {
    pub nodes: FeatureMatrix,
    pub node_classes: Vec<usize>,
    pub threshold: f64,
    pub built_at: u64,
}

impl From<&SpaceGraph> for GraphSeed {
    fn from(g: &SpaceGraph) -> Self {
        Self {
            nodes: g.fog.node_features.clone(),
            node_classes: g.node_classes.clone(),
            threshold: g.fog.threshold,
            built_at: g.built_at,
        }
    }
}

/// Everything needed to reconstruct an engine mid-stream.
#[derive(Clone, Debug)]
pub(crate) struct EngineParts {
    pub config: EngineConfig,
    pub text: FeatureMatrix,
    pub caches: DualCache,
    pub schedules: (ThresholdSchedule, ThresholdSchedule),
    pub samples_seen: u64,
    pub last_query: Option<(FeatureVector, FeatureVector)>,
    pub css_graph: GraphSeed,
    pub afv_graph: GraphSeed,
}

/// Adaptation state for one stream.
#[derive(Clone, Debug)]
pub struct Engine {
    config: EngineConfig,
    text: FeatureMatrix,
    caches: DualCache,
    css_schedule: ThresholdSchedule,
    afv_schedule: ThresholdSchedule,
    samples_seen: u64,
    css_graph: Option<SpaceGraph>,
    afv_graph: Option<SpaceGraph>,
    last_query: Option<(FeatureVector, FeatureVector)>,
}

impl Engine {
    /// `afv_dim` may be omitted when the config carries `d2`.
    pub fn new(config: EngineConfig, text: FeatureMatrix, afv_dim: Option<usize>) -> Result<Self> {
        config.validate()?;
        let k = text.rows();
        if k == 0 {
            return Err(Error::SchemaMismatch("no text features".into()));
        }
        if text.space() != Space::Css {
            return Err(Error::SpaceMismatch {
                expected: Space::Css,
                found: text.space(),
            });
        }
        let mut config = config;
        resolve(&mut config.k, k, "k")?;
        resolve(&mut config.d1, text.dim(), "d1")?;
        let d2 = match (config.d2, afv_dim) {
            (Some(c), Some(d)) if c != d => {
                return Err(Error::SchemaMismatch(format!("d2 is {c}, data has {d}")))
            }
            (Some(c), _) => c,
            (None, Some(d)) => d,
            (None, None) => return Err(Error::SchemaMismatch("unknown auxiliary dimension".into())),
        };
        config.d2 = Some(d2);
        let caches = DualCache::new(k, text.dim(), d2, config.l1, config.l2)?;
        let css_schedule = ThresholdSchedule::new(config.t0, config.g)?;
        let afv_schedule = ThresholdSchedule::new(config.t0, config.g)?;
        let mut engine = Self {
            config,
            text,
            caches,
            css_schedule,
            afv_schedule,
            samples_seen: 0,
            css_graph: None,
            afv_graph: None,
            last_query: None,
        };
        engine.rebuild_graphs(None, engine.css_schedule.current(), engine.afv_schedule.current())?;
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.text.rows()
    }

    pub fn text_features(&self) -> &FeatureMatrix {
        &self.text
    }

    pub fn caches(&self) -> &DualCache {
        &self.caches
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    pub fn schedules(&self) -> (ThresholdSchedule, ThresholdSchedule) {
        (self.css_schedule, self.afv_schedule)
    }

    pub fn css_graph(&self) -> Option<&SpaceGraph> {
        self.css_graph.as_ref()
    }

    pub fn afv_graph(&self) -> Option<&SpaceGraph> {
        self.afv_graph.as_ref()
    }

    pub fn last_query(&self) -> Option<&(FeatureVector, FeatureVector)> {
        self.last_query.as_ref()
    }

    /// Rebuilds an engine from persisted parts. Graphs are recomputed from
    /// the node sets they were last built over, so a restored engine sees
    /// the same cliques as the one that was saved.
    pub(crate) fn restore(parts: EngineParts) -> Result<Self> {
        parts.config.validate()?;
        let order = parts.config.graph_order;
        let build = |seed: GraphSeed| {
            SpaceGraph::build(
                &seed.nodes,
                seed.node_classes,
                seed.threshold,
                order,
                seed.built_at,
            )
        };
        Ok(Self {
            config: parts.config,
            text: parts.text,
            caches: parts.caches,
            css_schedule: parts.schedules.0,
            afv_schedule: parts.schedules.1,
            samples_seen: parts.samples_seen,
            css_graph: Some(build(parts.css_graph)?),
            afv_graph: Some(build(parts.afv_graph)?),
            last_query: parts.last_query,
        })
    }

    /// Visual class centers in the shared space for `query`; `None` for
    /// classes whose cache is empty.
    pub fn css_centers(&self, query: Option<&FeatureVector>) -> Result<Vec<Option<FeatureVector>>> {
        self.caches
            .css
            .iter()
            .map(|c| {
                if c.is_empty() {
                    return Ok(None);
                }
                match query {
                    Some(q) => css_class_center(c, q, self.config.alpha).map(Some),
                    // no query yet: equal weights
                    None => afv_like_average(c).map(Some),
                }
            })
            .collect()
    }

    pub fn afv_centers(&self, query: Option<&FeatureVector>) -> Result<Vec<Option<FeatureVector>>> {
        let params = self.config.center_params();
        let mode = match (self.config.afv_center_mode, query) {
            (AfvCenterMode::AttnWeighted, None) => AfvCenterMode::Average,
            (m, _) => m,
        };
        self.caches
            .afv
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    afv_class_center(c, query, mode, params).map(Some)
                }
            })
            .collect()
    }

    fn rebuild_graphs(
        &mut self,
        query: Option<&(FeatureVector, FeatureVector)>,
        css_threshold: f64,
        afv_threshold: f64,
    ) -> Result<()> {
        let k = self.classes();
        let css_nodes = assemble_css_nodes(&self.text, &self.css_centers(query.map(|q| &q.0))?)?;
        let css_classes = (0..2 * k).map(|i| i % k).collect();
        self.css_graph = Some(SpaceGraph::build(
            &css_nodes,
            css_classes,
            css_threshold,
            self.config.graph_order,
            self.samples_seen,
        )?);

        let d2 = self.config.d2.expect("resolved at construction");
        let mut afv_nodes = FeatureMatrix::empty(d2, Space::Afv);
        let mut afv_classes = Vec::new();
        for (c, center) in self.afv_centers(query.map(|q| &q.1))?.into_iter().enumerate() {
            if let Some(center) = center {
                afv_nodes.push(&center)?;
                afv_classes.push(c);
            }
        }
        self.afv_graph = Some(SpaceGraph::build(
            &afv_nodes,
            afv_classes,
            afv_threshold,
            self.config.graph_order,
            self.samples_seen,
        )?);
        Ok(())
    }

    fn check_batch(&self, batch: &ViewBatch) -> Result<()> {
        let d1 = self.text.dim();
        let d2 = self.config.d2.expect("resolved at construction");
        for v in &batch.css {
            if v.space() != Space::Css || v.dim() != d1 {
                return Err(Error::DimensionMismatch {
                    expected: d1,
                    found: v.dim(),
                });
            }
        }
        for v in &batch.afv {
            if v.space() != Space::Afv || v.dim() != d2 {
                return Err(Error::DimensionMismatch {
                    expected: d2,
                    found: v.dim(),
                });
            }
        }
        Ok(())
    }

    /// Runs the full per-sample protocol and mutates the caches.
    pub fn process_sample(&mut self, batch: &ViewBatch, label: usize) -> Result<SampleOutcome> {
        self.check_batch(batch)?;
        let cfg = self.config.clone();
        let index = self.samples_seen;
        let query = batch.original_css().clone();
        let query_aux = batch.original_afv().clone();

        let gate = marginal_entropy_gate(&batch.css, &self.text, cfg.tau, cfg.view_ratio)?;

        let css_decision = self.caches.css[gate.pseudo_label].consider_insert(CacheEntry {
            feature: query.clone(),
            entropy: gate.entropy,
            arrival_index: index,
        })?;
        let afv_decision = self.caches.afv[gate.pseudo_label].consider_insert(CacheEntry {
            feature: query_aux.clone(),
            entropy: gate.entropy,
            arrival_index: index,
        })?;

        let css_threshold = self.css_schedule.current();
        let afv_threshold = self.afv_schedule.current();
        let rebuild = index.is_multiple_of(cfg.graph_update_interval as u64);
        let pair = (query.clone(), query_aux.clone());
        if rebuild {
            self.rebuild_graphs(Some(&pair), css_threshold, afv_threshold)?;
        }
        if cfg.advance_on_reject || css_decision.admitted() {
            self.css_schedule.advance();
        }
        if cfg.advance_on_reject || afv_decision.admitted() {
            self.afv_schedule.advance();
        }
        self.last_query = Some(pair);

        let preds = self.predict(&query, &query_aux, &gate)?;
        self.samples_seen += 1;

        let css_graph = self.css_graph.as_ref().expect("built at construction");
        let afv_graph = self.afv_graph.as_ref().expect("built at construction");
        let record = SampleRecord {
            index,
            label,
            pseudo_label: gate.pseudo_label,
            gate_entropy: gate.entropy,
            predicted: PathPredictions {
                zero_shot: preds.zero_shot.argmax(),
                tda: argmax(&preds.tda),
                css: preds.css.argmax(),
                afv: preds.afv.argmax(),
                fused: preds.fused.argmax(),
            },
            css_cache: (&css_decision).into(),
            afv_cache: (&afv_decision).into(),
            css_mask_size: preds.css_mask.count(),
            afv_mask_size: preds.afv_mask.count(),
            css_cliques: css_graph.cliques.len(),
            afv_cliques: afv_graph.cliques.len(),
            threshold: css_threshold,
            graphs_rebuilt: rebuild,
        };
        Ok(SampleOutcome {
            record,
            zero_shot: preds.zero_shot,
            tda: preds.tda,
            css: preds.css,
            afv: preds.afv,
            fused: preds.fused,
            css_mask: preds.css_mask,
            afv_mask: preds.afv_mask,
        })
    }

    /// Predictions for `batch` from the current caches and graphs, without
    /// admitting it or rebuilding anything.
    pub fn peek(&self, batch: &ViewBatch) -> Result<Predictions> {
        self.check_batch(batch)?;
        let gate = marginal_entropy_gate(
            &batch.css,
            &self.text,
            self.config.tau,
            self.config.view_ratio,
        )?;
        self.predict(batch.original_css(), batch.original_afv(), &gate)
    }

    fn predict(
        &self,
        query: &FeatureVector,
        query_aux: &FeatureVector,
        gate: &GateOutput,
    ) -> Result<Predictions> {
        let cfg = &self.config;
        let k = self.classes();
        let index = self.samples_seen;

        let css_graph = self.css_graph.as_ref().expect("built at construction");
        let css_mask = match css_graph.node_mask(query, cfg.r)? {
            Some(m) if !m.is_all_zero() => m,
            _ => {
                warn!("sample {index}: empty shared-space mask, using all nodes");
                InlierMask::all(2 * k)
            }
        };
        let afv_graph = self.afv_graph.as_ref().expect("built at construction");
        let afv_mask = match afv_graph.node_mask(query_aux, cfg.r)? {
            Some(node_mask) => {
                // classes that gained a center after the last rebuild stay inliers
                let mut bits = vec![true; k];
                for (node, &class) in afv_graph.node_classes.iter().enumerate() {
                    bits[class] = node_mask.bits[node];
                }
                let m = InlierMask { bits };
                if m.is_all_zero() {
                    warn!("sample {index}: empty auxiliary mask, using all classes");
                    InlierMask::all(k)
                } else {
                    m
                }
            }
            None => InlierMask::all(k),
        };

        let zero_shot = match cfg.zero_shot_source {
            ZeroShotSource::GatedMean => gate.mean_probability.clone(),
            ZeroShotSource::OriginalView => zero_shot(query, &self.text, cfg.tau)?,
        };

        let css_nodes = assemble_css_nodes(&self.text, &self.css_centers(Some(query))?)?;
        let css = css_prediction(query, &css_nodes, &css_mask, cfg.tau)?;

        let afv_centers = self.afv_centers(Some(query_aux))?;
        let afv = match afv_prediction(query_aux, &afv_centers, &afv_mask, cfg.tau) {
            Ok(p) => p,
            Err(Error::EmptyAfv) => PredictionVector::zeros(k, PredictionKind::MaskedProbability),
            Err(e) => return Err(e),
        };

        let fused = fuse(&zero_shot, &css, &afv, cfg.betas)?;

        let snapshot = self.caches.snapshot_matrices();
        let tda = if snapshot.css.is_empty() {
            zero_shot.scores.clone()
        } else {
            let cache_scores = tda_adapted(query, &snapshot.css, &snapshot.css_labels, cfg.alpha)?;
            zero_shot
                .scores
                .iter()
                .zip(&cache_scores)
                .map(|(z, c)| z + cfg.tda_weight * c)
                .collect()
        };

        Ok(Predictions {
            zero_shot,
            tda,
            css,
            afv,
            fused,
            css_mask,
            afv_mask,
        })
    }

    /// Processes samples in order and accumulates per-path accuracy.
    pub fn run<'a, I>(&mut self, samples: I) -> Result<StreamResult>
    where
        I: IntoIterator<Item = &'a LabeledSample>,
    {
        let mut records = Vec::new();
        let mut scores = Vec::new();
        let mut correct = PathCounts::default();
        for s in samples {
            if s.label >= self.classes() {
                return Err(Error::SchemaMismatch(format!(
                    "label {} outside {} classes",
                    s.label,
                    self.classes()
                )));
            }
            let out = self.process_sample(&s.views, s.label)?;
            correct.add(&out.record);
            scores.push(out.path_scores());
            records.push(out.record);
        }
        let n = records.len();
        Ok(StreamResult {
            samples: n,
            correct,
            accuracy: correct.accuracy(n),
            records,
            scores,
        })
    }
}

fn resolve(slot: &mut Option<usize>, actual: usize, name: &str) -> Result<()> {
    match *slot {
        Some(v) if v != actual => Err(Error::SchemaMismatch(format!(
            "config {name} = {v}, data has {actual}"
        ))),
        _ => {
            *slot = Some(actual);
            Ok(())
        }
    }
}

fn afv_like_average(c: &crate::cache::ClassCache) -> Result<FeatureVector> {
    afv_class_center(c, None, AfvCenterMode::Average, AfvCenterParams::default())
}

/// Fresh engine over a whole dataset.
pub fn run_stream(config: &EngineConfig, dataset: &Dataset) -> Result<StreamResult> {
    let mut engine = Engine::new(
        config.clone(),
        dataset.text_features.clone(),
        Some(dataset.afv_dim),
    )?;
    engine.run(&dataset.samples)
}
