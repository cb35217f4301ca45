use std::collections::{BTreeSet, HashMap};

use super::{MergeMode, Segmentation};
use crate::error::Result;
use crate::weights::WeightedGraph;

/// Segments smaller than this are absorbed: 10% of the mean size a
/// segmentation into `desired` segments would have.
pub fn small_segment_threshold(n_points: usize, desired: usize) -> f64 {
    0.1 * n_points as f64 / desired.max(1) as f64
}

/// Absorbs every segment smaller than [`small_segment_threshold`] into the
/// neighbor across its lowest-weight boundary edge, using the weight the
/// merge sorted by. Smallest segments go first (ties by label) and sizes are
/// re-evaluated after each absorption; a small segment without neighbors is
/// left alone.
pub fn merge_small_segments(seg: &Segmentation, wg: &WeightedGraph, desired: usize) -> Result<Segmentation> {
    let weights = match seg.provenance() {
        Some(p) => match &p.merge.mode {
            MergeMode::LinearScalar(k) => {
                let mut combined = vec![0.0; wg.n_edges()];
                for m in p.merge.modalities.iter() {
                    for (acc, w) in combined.iter_mut().zip(wg.column(m)?) {
                        *acc += k.get(m) * w;
                    }
                }
                combined
            }
            MergeMode::MultiCriteria => wg.column(p.merge.sort_modality())?,
        },
        None => wg.column(wg.modalities().default_sort_modality())?,
    };
    Ok(merge_small_segments_by(seg, wg.edges(), &weights, desired))
}

/// [`merge_small_segments`] with explicit per-edge sort weights.
pub fn merge_small_segments_by(
    seg: &Segmentation,
    edges: &[(usize, usize)],
    weights: &[f64],
    desired: usize,
) -> Segmentation {
    let threshold = small_segment_threshold(seg.len(), desired);
    let n_seg = seg.n_segments();
    let is_small = |size: usize| (size as f64) < threshold;
    if !seg.sizes().iter().any(|&s| is_small(s)) {
        return seg.clone();
    }

    // cheapest boundary edge per neighboring segment: (weight, edge index)
    let mut boundary: Vec<HashMap<usize, (f64, usize)>> = vec![HashMap::new(); n_seg];
    let labels = seg.labels();
    let better = |a: (f64, usize), b: (f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt();
    for (e, &(i, j)) in edges.iter().enumerate() {
        let (a, b) = (labels[i], labels[j]);
        if a == b {
            continue;
        }
        let cand = (weights[e], e);
        for (x, y) in [(a, b), (b, a)] {
            let slot = boundary[x].entry(y).or_insert(cand);
            if better(cand, *slot) {
                *slot = cand;
            }
        }
    }

    let mut parent: Vec<usize> = (0..n_seg).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut size = seg.sizes().to_vec();
    let mut queue: BTreeSet<(usize, usize)> = (0..n_seg).filter(|&s| is_small(size[s])).map(|s| (size[s], s)).collect();

    while let Some((_, s)) = queue.pop_first() {
        // resolve stale neighbor ids and pick the cheapest edge
        let entries: Vec<(usize, (f64, usize))> = boundary[s].drain().collect();
        let mut resolved: HashMap<usize, (f64, usize)> = HashMap::with_capacity(entries.len());
        for (nb, cand) in entries {
            let r = root(&mut parent, nb);
            if r == s {
                continue;
            }
            let slot = resolved.entry(r).or_insert(cand);
            if better(cand, *slot) {
                *slot = cand;
            }
        }
        let Some((&target, _)) = resolved
            .iter()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.1 .1.cmp(&b.1 .1)))
        else {
            continue;
        };
        let was_queued = is_small(size[target]);
        if was_queued {
            queue.remove(&(size[target], target));
        }
        parent[s] = target;
        size[target] += size[s];
        resolved.remove(&target);
        let mut merged = std::mem::take(&mut boundary[target]);
        for (nb, cand) in resolved {
            let slot = merged.entry(nb).or_insert(cand);
            if better(cand, *slot) {
                *slot = cand;
            }
        }
        boundary[target] = merged;
        if is_small(size[target]) {
            queue.insert((size[target], target));
        }
    }

    let final_labels = labels.iter().map(|&l| root(&mut parent, l)).collect();
    let mut out = Segmentation::from_labels(final_labels);
    out.provenance = seg.provenance.clone();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(small_segment_threshold(1000, 100), 1.0);
        assert_eq!(small_segment_threshold(1000, 10), 10.0);
    }

    #[test]
    fn large_segments_are_untouched() {
        let seg = Segmentation::from_labels((0..1000).map(|i| i / 10).collect());
        let edges: Vec<(usize, usize)> = (0..999).map(|i| (i, i + 1)).collect();
        let w = vec![0.5; edges.len()];
        assert_eq!(merge_small_segments_by(&seg, &edges, &w, 100), seg);
    }

    #[test]
    fn small_segment_joins_cheapest_neighbor() {
        // chain: A (500 points) | S (7 points) | B (493 points)
        let labels: Vec<usize> = (0..1000)
            .map(|i| if i < 500 { 0 } else if i < 507 { 1 } else { 2 })
            .collect();
        let seg = Segmentation::from_labels(labels);
        let edges: Vec<(usize, usize)> = (0..999).map(|i| (i, i + 1)).collect();
        let mut w = vec![0.5; edges.len()];
        w[499] = 0.2; // A-S
        w[506] = 0.05; // S-B
        let out = merge_small_segments_by(&seg, &edges, &w, 10);
        assert_eq!(out.n_segments(), 2);
        assert_eq!(out.label(500), out.label(600));
        assert_ne!(out.label(500), out.label(0));
    }

    #[test]
    fn absorbed_segments_are_re_evaluated() {
        // ten 1-point segments in a row followed by a large one; pairs form
        // first and keep growing until they pass the threshold of 5
        let labels: Vec<usize> = (0..100).map(|i| i.min(10)).collect();
        let seg = Segmentation::from_labels(labels);
        let edges: Vec<(usize, usize)> = (0..99).map(|i| (i, i + 1)).collect();
        let w: Vec<f64> = (0..99).map(|i| 1.0 - i as f64 * 0.01).collect();
        let out = merge_small_segments_by(&seg, &edges, &w, 2);
        assert_eq!(out.sizes(), &[8, 92]);
    }

    #[test]
    fn isolated_small_segment_stays() {
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let seg = Segmentation::from_labels(labels);
        let edges: Vec<(usize, usize)> = (0..8).map(|i| (i, i + 1)).collect();
        let w = vec![0.1; 8];
        let out = merge_small_segments_by(&seg, &edges, &w, 1);
        assert_eq!(out.n_segments(), 2);
    }
}
