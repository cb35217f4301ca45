//! Build every connectivity graph over the same small frame and compare
//! edge counts, degree and connected components.

use pclv::cloud::backproject_depth;
use pclv::graph::{build_delaunay, build_grid8, build_knn, build_radius};
use pclv::synthetic::room_frame;
use pclv::ConnectivityGraph;

fn summary(name: &str, g: &ConnectivityGraph) {
    let adj = g.adjacency();
    let max_degree = adj.iter().map(Vec::len).max().unwrap_or(0);
    let mean = 2.0 * g.n_edges() as f64 / g.n_vertices().max(1) as f64;
    let components = g.component_labels().into_iter().max().map_or(0, |m| m + 1);
    println!("{name:<10} {:>7} edges  mean degree {mean:5.2}  max {max_degree:3}  {components} components", g.n_edges());
}

fn main() -> pclv::Result<()> {
    let frame = room_frame(96, 72, 3);
    let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
    println!("{} points", cloud.len());
    summary("grid8", &build_grid8(&cloud)?);
    summary("knn k=8", &build_knn(&cloud, 8)?);
    summary("radius", &build_radius(&cloud, 0.06)?);
    summary("delaunay", &build_delaunay(&cloud)?);
    Ok(())
}
