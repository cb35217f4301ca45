//! Segment an unordered scan with no camera: k-NN graph, unsigned normals,
//! PLY in and out.
//!
//! Usage: cargo run --release --example outdoor_ply [in.ply] [out.ply]

use std::path::PathBuf;

use pclv::cloud::{load_ply, write_ply, PlyOptions};
use pclv::pipeline::{self, RunConfig};
use pclv::synthetic::room_frame;
use pclv::PointCloud;

fn main() -> pclv::Result<()> {
    let mut args = std::env::args().skip(1);
    let input = match args.next() {
        Some(p) => PathBuf::from(p),
        None => {
            // strip the grid and viewpoint off a synthetic frame
            let frame = room_frame(200, 150, 9);
            let cloud = pclv::cloud::backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
            let bare = PointCloud::new(cloud.positions().to_vec(), cloud.colors().to_vec())?;
            let p = std::env::temp_dir().join("pclv_outdoor_input.ply");
            write_ply(&bare, &p, PlyOptions::default())?;
            p
        }
    };
    let output = args.next().map_or_else(|| std::env::temp_dir().join("pclv_outdoor_segments.ply"), PathBuf::from);

    let flags = vec![
        ("preset".to_string(), "outdoor".to_string()),
        ("input_ply".to_string(), input.display().to_string()),
        ("target_segments".to_string(), "400".to_string()),
        ("out_ply".to_string(), output.display().to_string()),
    ];
    let cfg = RunConfig::resolve(&[], &flags)?;
    let run = pipeline::run(&cfg)?;
    let r = &run.report;
    println!(
        "{} points, {} knn edges, unsigned normals: {}, {} segments at delta {:.4}",
        r.n_points, r.n_edges, r.unsigned_normals, r.n_segments, r.delta
    );
    println!("reloaded {} points from {}", load_ply(&output)?.len(), output.display());
    Ok(())
}
