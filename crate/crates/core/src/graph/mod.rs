//! Connectivity-graph construction: radius, k-nearest, Delaunay and 8-connected image grid.

mod delaunay;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

pub use delaunay::delaunay_tetrahedra;

use crate::cloud::{GridMapping, PointCloud};
use crate::disjoint::DisjointSets;
use crate::error::{Error, Result};
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Radius,
    Knn,
    Delaunay,
    Grid8,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Radius => "radius",
            GraphKind::Knn => "knn",
            GraphKind::Delaunay => "delaunay",
            GraphKind::Grid8 => "grid8",
        }
    }
}

impl std::fmt::Display for GraphKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "radius" => Ok(GraphKind::Radius),
            "knn" => Ok(GraphKind::Knn),
            "delaunay" => Ok(GraphKind::Delaunay),
            "grid8" => Ok(GraphKind::Grid8),
            other => Err(format!(
                "unknown graph method {other:?} (expected grid8, knn, radius or delaunay)"
            )),
        }
    }
}

/// Undirected simple graph over point indices.
///
/// Edges are stored as `(i, j)` with `i < j`, without duplicates, sorted
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    kind: GraphKind,
}

impl ConnectivityGraph {
    /// Normalizes, sorts and deduplicates the given pairs. Self-loops are
    /// rejected.
    pub fn from_edges(
        n_vertices: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        kind: GraphKind,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            if a.max(b) >= n_vertices {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n_vertices} vertices"
                )));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(ConnectivityGraph {
            n_vertices,
            edges: out,
            kind,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Connected-component label of every vertex, numbered by first occurrence.
    pub fn component_labels(&self) -> Vec<usize> {
        let mut sets = DisjointSets::new(self.n_vertices);
        for &(i, j) in &self.edges {
            sets.union(i, j);
        }
        sets.labels()
    }

    /// Adjacency lists, each sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Debug dump: header `i,j`, one row per edge.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let res = (|| {
            writeln!(w, "i,j")?;
            for (i, j) in &self.edges {
                writeln!(w, "{i},{j}")?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }
}

/// 8-connected graph over the valid pixels of an image grid.
pub fn grid8_graph(mapping: &GridMapping) -> ConnectivityGraph {
    let (w, h) = (mapping.width(), mapping.height());
    let mut edges = Vec::with_capacity(4 * mapping.n_points());
    for r in 0..h {
        for c in 0..w {
            let Some(p) = mapping.point_at(r, c) else {
                continue;
            };
            let mut link = |rr: usize, cc: usize| {
                if let Some(q) = mapping.point_at(rr, cc) {
                    edges.push((p.min(q), p.max(q)));
                }
            };
            if c + 1 < w {
                link(r, c + 1);
            }
            if r + 1 < h {
                if c > 0 {
                    link(r + 1, c - 1);
                }
                link(r + 1, c);
                if c + 1 < w {
                    link(r + 1, c + 1);
                }
            }
        }
    }
    edges.sort_unstable();
    ConnectivityGraph {
        n_vertices: mapping.n_points(),
        edges,
        kind: GraphKind::Grid8,
    }
}

/// 8-connected image-grid graph; requires the cloud's grid mapping.
pub fn build_grid8(cloud: &PointCloud) -> Result<ConnectivityGraph> {
    cloud.grid().map(grid8_graph).ok_or(Error::MissingGrid)
}

/// Symmetrized k-nearest-neighbor graph: `(i, j)` is an edge when either
/// point is among the other's `k` nearest.
pub fn build_knn(cloud: &PointCloud, k: usize) -> Result<ConnectivityGraph> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if cloud.len() < 2 {
        return Err(Error::InvalidParameter("kNN graph needs at least 2 points".into()));
    }
    let pts = cloud.positions();
    let tree = KdTree::build(pts);
    let edges: Vec<(usize, usize)> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            tree.nearest(&pts[i], k, Some(i))
                .into_iter()
                .map(move |n| (i.min(n.index), i.max(n.index)))
        })
        .collect();
    ConnectivityGraph::from_edges(pts.len(), edges, GraphKind::Knn)
}

/// Connects every pair of points strictly closer than `radius`.
pub fn build_radius(cloud: &PointCloud, radius: f64) -> Result<ConnectivityGraph> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let pts = cloud.positions();
    let tree = KdTree::build(pts);
    let edges: Vec<(usize, usize)> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            tree.within(&pts[i], radius)
                .into_iter()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
        .collect();
    ConnectivityGraph::from_edges(pts.len(), edges, GraphKind::Radius)
}

/// Edges of the 3D Delaunay tetrahedralization.
///
/// Exactly coplanar inputs use a 2D Delaunay triangulation in their plane;
/// duplicate points are attached to their first occurrence.
pub fn build_delaunay(cloud: &PointCloud) -> Result<ConnectivityGraph> {
    let edges = delaunay::delaunay_edges(cloud.positions())?;
    ConnectivityGraph::from_edges(cloud.len(), edges, GraphKind::Delaunay)
}
