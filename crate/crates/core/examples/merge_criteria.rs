//! The merge rule on a hand-built graph: one modality can veto a merge the
//! others accept. Then small-segment cleanup and the δ search on a frame.

use pclv::cloud::backproject_depth;
use pclv::merge::{merge_small_segments, search_delta, small_segment_threshold};
use pclv::pipeline::{prepare_cloud, RunConfig, RunReport};
use pclv::synthetic::room_frame;
use pclv::weights::{Modality, ModalitySet};
use pclv::{ConnectivityGraph, GraphKind, MergeConfig, MergeEngine, WeightedGraph};

fn main() -> pclv::Result<()> {
    // path 0-1-2-3: similar colors throughout, a depth jump between 1 and 2
    let graph = ConnectivityGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)], GraphKind::Knn)?;
    let both = ModalitySet::new([Modality::Color, Modality::Distance])?;
    #[rustfmt::skip]
    let tuples = vec![
        0.10, 0.10,
        0.12, 5.00,
        0.11, 0.10,
    ];
    let wg = WeightedGraph::from_parts(graph.clone(), both.clone(), tuples, None)?;
    let color_only = WeightedGraph::from_parts(graph, ModalitySet::color(), vec![0.10, 0.12, 0.11], None)?;
    for (name, g, mods) in [("color", &color_only, ModalitySet::color()), ("color+distance", &wg, both)] {
        let seg = MergeEngine::new(g, &MergeConfig::new(1.0, mods))?.segment();
        println!("{name:<15} labels {:?}", seg.labels());
    }

    // a real frame
    let frame = room_frame(160, 120, 5);
    let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
    let cfg = RunConfig::default();
    let prepared = prepare_cloud(&cfg, cloud, RunReport::default())?;
    let engine = MergeEngine::new(&prepared.weighted, &cfg.merge_config())?;
    println!("\n{} points", prepared.cloud.len());
    for delta in [0.1, 1.0, 10.0, 100.0] {
        let raw = engine.segment_with_delta(delta);
        let desired = raw.n_segments();
        let cleaned = merge_small_segments(&raw, &prepared.weighted, desired)?;
        println!(
            "delta {delta:>6}: {:>6} segments, {:>6} after removing those under {:.1} points",
            raw.n_segments(),
            cleaned.n_segments(),
            small_segment_threshold(raw.len(), desired)
        );
    }
    for target in [50, 300, 1500] {
        let found = search_delta(&engine, target, true);
        println!(
            "target {target:>5}: {} segments at delta {:.4} after {} evaluations (hit: {})",
            found.n_segments(),
            found.delta,
            found.iterations,
            found.hit
        );
    }
    Ok(())
}
