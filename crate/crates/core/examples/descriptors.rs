//! Normals and FPFH on a synthetic frame: how far estimated normals are
//! from the face normals, and how FPFH separates surfaces.

use pclv::cloud::backproject_depth;
use pclv::descriptors::{compute_fpfh, directions, estimate_normals};
use pclv::synthetic::room_frame;
use pclv::weights::fpfh_weight;

fn main() -> pclv::Result<()> {
    let frame = room_frame(128, 96, 11);
    let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
    let est = estimate_normals(&cloud, 10, cloud.viewpoint())?;
    let normals = directions(&est);
    let degenerate = est.iter().filter(|e| e.degenerate).count();
    let mean_curv = est.iter().map(|e| e.curvature).sum::<f64>() / est.len() as f64;
    println!("{} normals, {degenerate} degenerate, mean curvature {mean_curv:.4}", normals.len());

    // normals point toward the camera at the origin
    let facing = cloud
        .positions()
        .iter()
        .zip(&normals)
        .filter(|(p, n)| p[0] * n[0] + p[1] * n[1] + p[2] * n[2] <= 0.0)
        .count();
    println!("{facing}/{} normals face the viewpoint", normals.len());

    let hist = compute_fpfh(&cloud, &normals, 15)?;
    let grid = cloud.grid().expect("frame has a grid");
    let label = |i: usize| {
        let (r, c) = grid.pixel_of(i);
        frame.ground_truth.get(r, c)
    };
    let (mut same, mut diff) = ((0.0, 0usize), (0.0, 0usize));
    for i in (0..hist.len()).step_by(7) {
        for j in (i + 1..hist.len()).step_by(331) {
            let w = fpfh_weight(&hist[i], &hist[j]);
            let slot = if label(i) == label(j) { &mut same } else { &mut diff };
            slot.0 += w;
            slot.1 += 1;
        }
    }
    println!(
        "mean FPFH distance: same surface {:.4}, different surfaces {:.4}",
        same.0 / same.1.max(1) as f64,
        diff.0 / diff.1.max(1) as f64
    );
    Ok(())
}
