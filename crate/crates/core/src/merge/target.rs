use super::{merge_small_segments_by, MergeEngine, Segmentation};

pub const DELTA_SEARCH_ITERATIONS: usize = 20;
/// Relative distance from the target count that counts as a hit.
pub const DELTA_SEARCH_TOLERANCE: f64 = 0.05;
const DELTA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DeltaSearch {
    pub target: usize,
    /// δ of the closest segmentation found.
    pub delta: f64,
    pub segmentation: Segmentation,
    pub iterations: usize,
    /// Final count is within the tolerance of the target.
    pub hit: bool,
}

impl DeltaSearch {
    pub fn n_segments(&self) -> usize {
        self.segmentation.n_segments()
    }
}

/// Bisects log δ for a segmentation with `target` segments, counted after
/// small-segment post-processing when `postprocess` is set. Stops early once
/// within tolerance; otherwise keeps the closest count seen.
pub fn search_delta(engine: &MergeEngine<'_>, target: usize, postprocess: bool) -> DeltaSearch {
    let target = target.max(1);
    let edges = engine.graph().edges();
    let n = engine.graph().n_vertices();
    let run = |delta: f64| {
        let seg = engine.segment_with_delta(delta);
        if postprocess {
            merge_small_segments_by(&seg, edges, engine.sort_weights(), target)
        } else {
            seg
        }
    };
    let within = |count: usize| (count as f64 - target as f64).abs() <= DELTA_SEARCH_TOLERANCE * target as f64;
    let mut best: Option<(usize, f64, Segmentation)> = None;
    let mut iterations = 0;
    let consider = |delta: f64, seg: Segmentation, best: &mut Option<(usize, f64, Segmentation)>| {
        let miss = seg.n_segments().abs_diff(target);
        if best.as_ref().is_none_or(|b| miss < b.0) {
            *best = Some((miss, delta, seg));
        }
    };

    // any δ above 2n merges every adjacent pair, since weights stay below 2
    let mut lo = DELTA_FLOOR.ln();
    let mut hi = (4.0 * n.max(1) as f64).ln();
    for bound in [lo, hi] {
        let seg = run(bound.exp());
        iterations += 1;
        let done = within(seg.n_segments());
        consider(bound.exp(), seg, &mut best);
        if done {
            break;
        }
    }
    while iterations < DELTA_SEARCH_ITERATIONS && !within(best.as_ref().unwrap().2.n_segments()) {
        let mid = 0.5 * (lo + hi);
        let delta = mid.exp();
        let seg = run(delta);
        iterations += 1;
        let count = seg.n_segments();
        consider(delta, seg, &mut best);
        if count > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, delta, segmentation) = best.expect("at least one evaluation");
    let hit = within(segmentation.n_segments());
    DeltaSearch {
        target,
        delta,
        segmentation,
        iterations,
        hit,
    }
}
