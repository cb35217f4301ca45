//! Shaded-corner comparison: PCLV (color, distance, normal with the
//! multi-criteria merge), color-only LV, and the linear-scalar merge, at
//! matched segment counts.
//!
//! Usage: cargo run --release --example compare_modalities [target]

use pclv::cloud::backproject_depth;
use pclv::eval::{evaluate, project_labels};
use pclv::pipeline::{prepare_cloud, segment_prepared, ModeChoice, RunConfig, RunReport};
use pclv::synthetic::corner_suite;
use pclv::weights::ModalitySet;

fn main() -> pclv::Result<()> {
    let target: usize = std::env::args().nth(1).map_or(40, |s| s.parse().expect("target count"));
    let configs = [
        ("pclv", ModalitySet::pclv(), ModeChoice::Multi),
        ("lv", ModalitySet::color(), ModeChoice::Multi),
        ("linear", ModalitySet::pclv(), ModeChoice::Linear),
    ];
    println!("scene config n_segments boundary_recall under_seg_error delta");
    for (i, scene) in corner_suite().iter().enumerate() {
        let frame = scene.render();
        let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
        for (name, modalities, mode) in &configs {
            let cfg = RunConfig {
                modalities: modalities.clone(),
                mode: *mode,
                target_segments: Some(target),
                delta: None,
                ..RunConfig::default()
            };
            let prepared = prepare_cloud(&cfg, cloud.clone(), RunReport::default())?;
            let mut report = prepared.report.clone();
            let seg = segment_prepared(&cfg, &prepared, &mut report)?;
            let pred = project_labels(&seg, cloud.grid().expect("frame has a grid"))?;
            let m = evaluate(&frame.ground_truth, &pred, 2.0)?;
            println!(
                "{i} {name} {} {:.3} {:.4} {:.4}",
                seg.n_segments(),
                m.boundary_recall,
                m.under_seg_error,
                report.delta
            );
        }
    }
    Ok(())
}
