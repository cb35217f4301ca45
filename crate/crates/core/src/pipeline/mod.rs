//! End-to-end runs: ingest, graph, descriptors, weights, merge,
//! post-processing, outputs and optional evaluation.

mod config;

pub use config::{
    parse_pairs, preset_names, preset_pairs, Diagnostic, IntrinsicsSource, ModeChoice, NormalSign, RunConfig,
    DEFAULT_DELTA, DEFAULT_PRESET,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::cloud::{
    backproject_depth, load_color_image, load_depth_image, load_label_image, load_ply, write_segmented_ply,
    PointCloud, FPFH_BINS,
};
use crate::descriptors::{self, DescriptorKind};
use crate::error::{Error, Result, Stage};
use crate::eval::{self, project_labels, LabelImage, MetricsRecord, SweepPoint};
use crate::graph::{self, ConnectivityGraph, GraphKind};
use crate::merge::{merge_small_segments_by, search_delta, MergeEngine, Segmentation};
use crate::weights::{assign_weights, Modality, WeightedGraph};

/// Counters and timings collected during a run.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub n_points: usize,
    pub n_edges: usize,
    /// Segment count straight out of the merge (δ mode only).
    pub raw_segments: Option<usize>,
    pub n_segments: usize,
    /// δ that produced the output.
    pub delta: f64,
    pub target_segments: Option<usize>,
    pub target_hit: Option<bool>,
    pub search_iterations: Option<usize>,
    /// Desired count used by the small-segment rule, if it ran.
    pub postprocess_segments: Option<usize>,
    pub unsigned_normals: bool,
    pub sort_modality: Option<Modality>,
    /// Number of normal estimations performed (cache hits excluded).
    pub normal_estimations: usize,
    pub fpfh_computations: usize,
    pub timings: Vec<(Stage, f64)>,
}

impl RunReport {
    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.1).sum()
    }

    pub fn seconds(&self, stage: Stage) -> f64 {
        self.timings.iter().filter(|t| t.0 == stage).map(|t| t.1).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub segmentation: Segmentation,
    pub metrics: Option<MetricsRecord>,
    pub report: RunReport,
    pub cloud: PointCloud,
}

/// Loaded cloud with its weighted graph, ready for merging.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cloud: PointCloud,
    pub weighted: WeightedGraph,
    pub report: RunReport,
}

fn timed<T>(report: &mut RunReport, stage: Stage, f: impl FnOnce(&mut RunReport) -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f(report).map_err(|e| e.at(stage));
    report.timings.push((stage, start.elapsed().as_secs_f64()));
    out
}

fn check_diagnostics(cfg: &RunConfig) -> Result<()> {
    let diags = cfg.validate();
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(
            diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
        ))
    }
}

/// Reads the configured input into a point cloud.
pub fn load_input(cfg: &RunConfig) -> Result<PointCloud> {
    if let Some(ply) = &cfg.input_ply {
        return load_ply(ply);
    }
    let (Some(depth), Some(rgb), Some(intr)) = (&cfg.input_depth, &cfg.input_rgb, &cfg.intrinsics) else {
        return Err(Error::Config("no input configured".into()));
    };
    let intr = intr.load()?;
    backproject_depth(&load_depth_image(depth)?, &load_color_image(rgb)?, &intr)
}

pub fn build_graph(cfg: &RunConfig, cloud: &PointCloud) -> Result<ConnectivityGraph> {
    match cfg.graph {
        GraphKind::Grid8 => graph::build_grid8(cloud),
        GraphKind::Knn => graph::build_knn(cloud, cfg.k.unwrap_or(0)),
        GraphKind::Radius => graph::build_radius(cloud, cfg.radius.unwrap_or(0.0)),
        GraphKind::Delaunay => graph::build_delaunay(cloud),
    }
}

fn cache_path(cfg: &RunConfig, name: &str) -> Option<PathBuf> {
    cfg.descriptor_cache.as_ref().map(|dir| dir.join(name))
}

/// Adds whatever descriptors the modality set needs and nothing else.
fn add_descriptors(cfg: &RunConfig, mut cloud: PointCloud, report: &mut RunReport) -> Result<PointCloud> {
    if !cfg.modalities.needs_normals() {
        return Ok(cloud);
    }
    let n = cloud.len();
    if cfg.estimate_normals {
        let cache = cache_path(cfg, &format!("normals_k{}.bin", cfg.normal_k));
        let cached = cache
            .as_ref()
            .and_then(|p| descriptors::load_cache(p, DescriptorKind::Normals, cfg.normal_k, n, 3));
        let normals: Vec<[f64; 3]> = match cached {
            Some(flat) => flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            None => {
                report.normal_estimations += 1;
                let est = descriptors::estimate_normals(&cloud, cfg.normal_k, cloud.viewpoint())?;
                let dirs = descriptors::directions(&est);
                if let Some(p) = &cache {
                    let flat: Vec<f64> = dirs.iter().flatten().copied().collect();
                    descriptors::save_cache(p, DescriptorKind::Normals, cfg.normal_k, n, &flat)?;
                }
                dirs
            }
        };
        cloud = cloud.with_normals(normals)?;
    } else if cloud.normals().is_none() {
        return Err(Error::MissingDescriptor(Modality::Normal));
    }
    if cfg.modalities.contains(Modality::Fpfh) {
        let cache = cache_path(cfg, &format!("fpfh_k{}_n{}.bin", cfg.fpfh_k, cfg.normal_k));
        let cached = cache
            .as_ref()
            .and_then(|p| descriptors::load_cache(p, DescriptorKind::Fpfh, cfg.fpfh_k, n, FPFH_BINS));
        let hist = match cached {
            Some(flat) => flat
                .chunks_exact(FPFH_BINS)
                .map(|c| c.try_into().expect("chunk of 33"))
                .collect(),
            None => {
                report.fpfh_computations += 1;
                let h = descriptors::compute_fpfh(&cloud, cloud.normals().expect("set above"), cfg.fpfh_k)?;
                if let Some(p) = &cache {
                    let flat: Vec<f64> = h.iter().flatten().copied().collect();
                    descriptors::save_cache(p, DescriptorKind::Fpfh, cfg.fpfh_k, n, &flat)?;
                }
                h
            }
        };
        cloud = cloud.with_fpfh(hist)?;
    }
    Ok(cloud)
}

/// Ingest through weight assignment.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    check_diagnostics(cfg)?;
    let mut report = RunReport::default();
    let cloud = timed(&mut report, Stage::Ingest, |_| load_input(cfg))?;
    prepare_cloud(cfg, cloud, report)
}

/// [`prepare`] for a cloud already in memory; the input keys are ignored.
pub fn prepare_cloud(cfg: &RunConfig, cloud: PointCloud, mut report: RunReport) -> Result<Prepared> {
    report.n_points = cloud.len();
    let graph = timed(&mut report, Stage::Graph, |_| build_graph(cfg, &cloud))?;
    report.n_edges = graph.n_edges();
    let cloud = timed(&mut report, Stage::Descriptors, |r| add_descriptors(cfg, cloud, r))?;
    let unsigned = match cfg.unsigned_normals {
        NormalSign::Auto => cloud.viewpoint().is_none(),
        NormalSign::Signed => false,
        NormalSign::Unsigned => true,
    };
    report.unsigned_normals = unsigned;
    let weighted = timed(&mut report, Stage::Weights, |_| {
        assign_weights(graph, &cloud, &cfg.modalities, unsigned)
    })?;
    Ok(Prepared {
        cloud,
        weighted,
        report,
    })
}

/// Merge and post-process a prepared graph according to `cfg`.
pub fn segment_prepared(cfg: &RunConfig, prepared: &Prepared, report: &mut RunReport) -> Result<Segmentation> {
    let merge_cfg = cfg.merge_config();
    report.sort_modality = Some(merge_cfg.sort_modality());
    let engine = timed(report, Stage::Merge, |_| MergeEngine::new(&prepared.weighted, &merge_cfg))?;
    if let Some(target) = cfg.target_segments {
        let found = timed(report, Stage::Merge, |_| Ok(search_delta(&engine, target, cfg.postprocess)))?;
        report.delta = found.delta;
        report.target_segments = Some(target);
        report.target_hit = Some(found.hit);
        report.search_iterations = Some(found.iterations);
        report.postprocess_segments = cfg.postprocess.then_some(target);
        report.n_segments = found.n_segments();
        return Ok(found.segmentation);
    }
    let delta = cfg.delta.unwrap_or(DEFAULT_DELTA);
    let raw = timed(report, Stage::Merge, |_| Ok(engine.segment_with_delta(delta)))?;
    report.delta = delta;
    report.raw_segments = Some(raw.n_segments());
    let seg = if cfg.postprocess {
        let desired = cfg.postprocess_segments.unwrap_or(raw.n_segments());
        report.postprocess_segments = Some(desired);
        timed(report, Stage::Postprocess, |_| {
            Ok(merge_small_segments_by(&raw, prepared.weighted.edges(), engine.sort_weights(), desired))
        })?
    } else {
        raw
    };
    report.n_segments = seg.n_segments();
    Ok(seg)
}

fn load_ground_truth(cfg: &RunConfig, path: &Path) -> Result<LabelImage> {
    let gt = load_label_image(path)?;
    Ok(if cfg.gt_ignore_zero { gt.without_zero() } else { gt })
}

/// Runs every stage, writes the configured outputs and evaluates against
/// the ground truth when one is given.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    finish(cfg, prepared)
}

/// [`run`] on a cloud already in memory.
pub fn run_cloud(cfg: &RunConfig, cloud: PointCloud) -> Result<RunOutput> {
    check_diagnostics_except_input(cfg)?;
    let prepared = prepare_cloud(cfg, cloud, RunReport::default())?;
    finish(cfg, prepared)
}

fn check_diagnostics_except_input(cfg: &RunConfig) -> Result<()> {
    let diags: Vec<_> = cfg
        .validate()
        .into_iter()
        .filter(|d| !matches!(d.field, "input_ply" | "input_depth" | "input_rgb" | "intrinsics"))
        .collect();
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(
            diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
        ))
    }
}

fn finish(cfg: &RunConfig, prepared: Prepared) -> Result<RunOutput> {
    let mut report = prepared.report.clone();
    let segmentation = segment_prepared(cfg, &prepared, &mut report)?;
    let cloud = prepared.cloud;

    let (delta, target_hit) = (report.delta, report.target_hit);
    let metrics = match &cfg.gt {
        None => None,
        Some(gt_path) => Some(timed(&mut report, Stage::Eval, |_| {
            let grid = cloud.grid().ok_or(Error::MissingGrid)?;
            let gt = load_ground_truth(cfg, gt_path)?;
            let pred = project_labels(&segmentation, grid)?;
            let m = eval::evaluate(&gt, &pred, cfg.boundary_distance)?;
            let mut flags = Vec::new();
            if target_hit == Some(false) {
                flags.push(format!("target_missed:{}", segmentation.n_segments()));
            }
            Ok(MetricsRecord {
                n_segments: segmentation.n_segments(),
                boundary_recall: m.boundary_recall,
                under_seg_error: m.under_seg_error,
                delta,
                graph: cfg.graph.name().into(),
                modalities: cfg.modalities.list(),
                mode: cfg.merge_mode().name().into(),
                target: cfg.target_segments,
                flags,
            })
        })?),
    };

    timed(&mut report, Stage::Output, |r| {
        if let Some(p) = &cfg.out_labels {
            segmentation.write_labels(p)?;
        }
        if let Some(p) = &cfg.out_ply {
            write_segmented_ply(&cloud, &segmentation, p)?;
        }
        if let Some(p) = &cfg.out_label_image {
            let grid = cloud.grid().ok_or(Error::MissingGrid)?;
            project_labels(&segmentation, grid)?.save_png(p)?;
        }
        if let (Some(p), Some(m)) = (&cfg.out_csv, &metrics) {
            eval::write_sweep_csv(p, std::slice::from_ref(m))?;
        }
        if let Some(p) = metadata_path(cfg) {
            let meta = metadata(cfg, r, metrics.as_ref());
            let text = serde_json::to_string_pretty(&meta).expect("json value");
            std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    })?;

    Ok(RunOutput {
        segmentation,
        metrics,
        report,
        cloud,
    })
}

/// Sidecar location: `out_meta`, else the labels path with `.json` appended.
pub fn metadata_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.out_meta.clone().or_else(|| {
        cfg.out_labels.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".json");
            PathBuf::from(s)
        })
    })
}

/// Config that reproduces a finished run without searching: the found δ
/// and the post-processing count are fixed.
pub fn replay_config(cfg: &RunConfig, report: &RunReport) -> RunConfig {
    let mut replay = cfg.clone();
    replay.delta = Some(report.delta);
    replay.target_segments = None;
    replay.postprocess_segments = report.postprocess_segments;
    replay.postprocess = report.postprocess_segments.is_some();
    replay
}

fn pairs_json(pairs: Vec<(String, String)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k, Value::String(v))).collect::<Map<_, _>>())
}

/// Run metadata: config echo, replay config, counts, δ and timings.
pub fn metadata(cfg: &RunConfig, report: &RunReport, metrics: Option<&MetricsRecord>) -> Value {
    let timing: Map<String, Value> = report
        .timings
        .iter()
        .fold(Map::new(), |mut m, (stage, secs)| {
            let entry = m.entry(stage.to_string()).or_insert(json!(0.0));
            *entry = json!(entry.as_f64().unwrap_or(0.0) + secs * 1e3);
            m
        });
    json!({
        "config": pairs_json(cfg.to_pairs()),
        "replay": pairs_json(replay_config(cfg, report).to_pairs()),
        "n_points": report.n_points,
        "n_edges": report.n_edges,
        "n_segments": report.n_segments,
        "raw_segments": report.raw_segments,
        "delta": report.delta,
        "target_segments": report.target_segments,
        "target_hit": report.target_hit,
        "search_iterations": report.search_iterations,
        "postprocess_segments": report.postprocess_segments,
        "graph": cfg.graph.name(),
        "modalities": cfg.modalities.list(),
        "mode": cfg.merge_mode().name(),
        "sort_modality": report.sort_modality.map(|m| m.name()),
        "unsigned_normals": report.unsigned_normals,
        "normal_k": cfg.normal_k,
        "fpfh_k": cfg.fpfh_k,
        "timing_ms": timing,
        "total_ms": report.total_seconds() * 1e3,
        "metrics": metrics.map(|m| json!({
            "boundary_recall": m.boundary_recall,
            "under_seg_error": m.under_seg_error,
            "n_segments": m.n_segments,
            "flags": m.flags,
        })),
    })
}

/// Reads the replay config out of a metadata sidecar.
pub fn load_replay(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let replay = value
        .get("replay")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::format(path, "no \"replay\" object"))?;
    let pairs: Vec<(String, String)> = replay
        .iter()
        .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string()))
        .collect();
    RunConfig::from_pairs(&pairs)
}

/// Segment-count sweep: a δ search per target, each scored against the
/// configured ground truth.
pub fn run_sweep(cfg: &RunConfig, targets: &[usize]) -> Result<Vec<SweepPoint>> {
    let prepared = prepare(cfg)?;
    sweep_prepared(cfg, &prepared, targets)
}

pub fn sweep_prepared(cfg: &RunConfig, prepared: &Prepared, targets: &[usize]) -> Result<Vec<SweepPoint>> {
    let gt_path = cfg
        .gt
        .as_ref()
        .ok_or_else(|| Error::Config("gt: a sweep needs ground truth".into()))?;
    let gt = load_ground_truth(cfg, gt_path).map_err(|e| e.at(Stage::Eval))?;
    let grid = prepared.cloud.grid().ok_or(Error::MissingGrid).map_err(|e| e.at(Stage::Eval))?;
    let engine = MergeEngine::new(&prepared.weighted, &cfg.merge_config()).map_err(|e| e.at(Stage::Merge))?;
    eval::sweep(&engine, grid, &gt, targets, cfg.boundary_distance, cfg.postprocess).map_err(|e| e.at(Stage::Eval))
}

/// Sweep over explicit δ values instead of target counts.
pub fn sweep_deltas(cfg: &RunConfig, prepared: &Prepared, deltas: &[f64]) -> Result<Vec<SweepPoint>> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one delta".into()));
    }
    let gt_path = cfg
        .gt
        .as_ref()
        .ok_or_else(|| Error::Config("gt: a sweep needs ground truth".into()))?;
    let gt = load_ground_truth(cfg, gt_path)?;
    let grid = prepared.cloud.grid().ok_or(Error::MissingGrid)?;
    let engine = MergeEngine::new(&prepared.weighted, &cfg.merge_config())?;
    deltas
        .iter()
        .map(|&delta| {
            let raw = engine.segment_with_delta(delta);
            let seg = if cfg.postprocess {
                let desired = cfg.postprocess_segments.unwrap_or(raw.n_segments());
                merge_small_segments_by(&raw, prepared.weighted.edges(), engine.sort_weights(), desired)
            } else {
                raw
            };
            let m = eval::evaluate(&gt, &project_labels(&seg, grid)?, cfg.boundary_distance)?;
            let mut flags = Vec::new();
            if seg.n_segments() == seg.len() {
                flags.push("trivial_oversegmentation".to_string());
            }
            Ok(SweepPoint {
                record: MetricsRecord {
                    n_segments: seg.n_segments(),
                    boundary_recall: m.boundary_recall,
                    under_seg_error: m.under_seg_error,
                    delta,
                    graph: cfg.graph.name().into(),
                    modalities: cfg.modalities.list(),
                    mode: cfg.merge_mode().name().into(),
                    target: None,
                    flags,
                },
                segmentation: seg,
            })
        })
        .collect()
}
