//! Boundary recall and under-segmentation error against segment count for
//! a few modality sets, written as one CSV.
//!
//! Usage: cargo run --release --example sweep_curves [out.csv]

use pclv::cloud::backproject_depth;
use pclv::eval::{sweep, write_sweep_csv};
use pclv::pipeline::{prepare_cloud, RunConfig, RunReport};
use pclv::synthetic::room_frame;
use pclv::weights::ModalitySet;
use pclv::MergeEngine;

fn main() -> pclv::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/sweep_curves.csv".into());
    let frame = room_frame(240, 180, 21);
    let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
    let grid = cloud.grid().expect("frame has a grid").clone();
    let gt = frame.ground_truth.without_zero();
    let targets = [50, 100, 200, 400, 800, 1600];

    let mut records = Vec::new();
    for preset in ["lv", "lv_d", "pclv"] {
        let cfg = RunConfig {
            modalities: ModalitySet::preset(preset).expect("known preset"),
            ..RunConfig::default()
        };
        let prepared = prepare_cloud(&cfg, cloud.clone(), RunReport::default())?;
        let engine = MergeEngine::new(&prepared.weighted, &cfg.merge_config())?;
        for p in sweep(&engine, &grid, &gt, &targets, 2.0, true)? {
            let r = &p.record;
            println!(
                "{preset:<5} N={:<5} BR={:.3} UE={:.2} {}",
                r.n_segments,
                r.boundary_recall,
                r.under_seg_error,
                r.flags.join(",")
            );
            records.push(p.record);
        }
    }
    write_sweep_csv(out.as_ref(), &records)?;
    println!("wrote {out}");
    Ok(())
}
