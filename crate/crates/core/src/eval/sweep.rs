use std::path::Path;

use rayon::prelude::*;

use super::{evaluate, project_labels, LabelImage, MetricsRecord};
use crate::cloud::GridMapping;
use crate::error::{Error, Result};
use crate::merge::{search_delta, MergeEngine, Segmentation};

pub const SWEEP_CSV_HEADER: &str = "delta,n_segments,boundary_recall,under_seg_error,graph,modalities,mode";

/// A sweep entry together with the segmentation it was measured on.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub record: MetricsRecord,
    pub segmentation: Segmentation,
}

/// For each target count: search δ, post-process, project onto the image
/// grid and score against `gt`. Entries come back in target order; a missed
/// target is flagged rather than dropped.
pub fn sweep(
    engine: &MergeEngine<'_>,
    grid: &GridMapping,
    gt: &LabelImage,
    targets: &[usize],
    d: f64,
    postprocess: bool,
) -> Result<Vec<SweepPoint>> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one target count".into()));
    }
    if let Some(t) = targets.iter().find(|&&t| t == 0) {
        return Err(Error::InvalidParameter(format!("target count must be positive, got {t}")));
    }
    let cfg = engine.config();
    let n_points = engine.graph().n_vertices();
    targets
        .par_iter()
        .map(|&target| {
            let found = search_delta(engine, target, postprocess);
            let pred = project_labels(&found.segmentation, grid)?;
            let m = evaluate(gt, &pred, d)?;
            let mut flags = Vec::new();
            if !found.hit {
                flags.push(format!("target_missed:{}", found.n_segments()));
            }
            if found.n_segments() == n_points {
                flags.push("trivial_oversegmentation".to_string());
            }
            Ok(SweepPoint {
                record: MetricsRecord {
                    n_segments: found.n_segments(),
                    boundary_recall: m.boundary_recall,
                    under_seg_error: m.under_seg_error,
                    delta: found.delta,
                    graph: engine.graph().graph().kind().name().to_string(),
                    modalities: cfg.modalities.list(),
                    mode: cfg.mode.name().to_string(),
                    target: Some(target),
                    flags,
                },
                segmentation: found.segmentation,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut text = String::from(SWEEP_CSV_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
