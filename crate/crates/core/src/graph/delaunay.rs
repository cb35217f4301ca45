//! Incremental Bowyer-Watson 3D Delaunay tetrahedralization on exact
//! orientation / in-sphere predicates.

use std::collections::HashMap;

use robust::{orient3d, insphere, Coord3D};
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::cloud::Point3;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
/// Perturbation retries after the unperturbed attempt.
const MAX_RETRIES: u32 = 4;
const JITTER_BASE: f64 = 1e-9;
/// Super-tetrahedron size relative to the input extent.
const SUPER_SCALE: f64 = 1e4;

#[inline]
fn c3(p: &Point3) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

#[inline]
fn orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    orient3d(c3(a), c3(b), c3(c), c3(d))
}

#[derive(Debug, Clone)]
struct Tet {
    v: [usize; 4],
    nb: [usize; 4],
    alive: bool,
}

struct Mesh {
    pts: Vec<Point3>,
    tets: Vec<Tet>,
    free: Vec<usize>,
    // scratch for cavity search: stamp per tet
    mark: Vec<u32>,
    stamp: u32,
    last: usize,
}

struct BoundaryFace {
    v: [usize; 4],
    slot: usize,
    outer: usize,
}

impl Mesh {
    fn new(mut pts: Vec<Point3>) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &pts {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let center = [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a]));
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max).max(1e-9);
        let s = SUPER_SCALE * extent;
        let n = pts.len();
        for d in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
            pts.push([0, 1, 2].map(|a| center[a] + s * d[a]));
        }
        let mut v = [n, n + 1, n + 2, n + 3];
        if orient(&pts[v[0]], &pts[v[1]], &pts[v[2]], &pts[v[3]]) < 0.0 {
            v.swap(0, 1);
        }
        Mesh {
            pts,
            tets: vec![Tet {
                v,
                nb: [NONE; 4],
                alive: true,
            }],
            free: Vec::new(),
            mark: vec![0],
            stamp: 0,
            last: 0,
        }
    }

    fn orient_with(&self, v: &[usize; 4], k: usize, p: usize) -> f64 {
        let mut q = *v;
        q[k] = p;
        orient(&self.pts[q[0]], &self.pts[q[1]], &self.pts[q[2]], &self.pts[q[3]])
    }

    fn locate(&self, p: usize) -> Result<usize> {
        let mut t = self.last;
        let limit = 4 * self.tets.len() + 64;
        for step in 0..limit {
            let tet = &self.tets[t];
            let mut moved = false;
            for i in 0..4 {
                // rotate the starting face so walks cannot cycle on ties
                let k = (i + step) % 4;
                if self.orient_with(&tet.v, k, p) < 0.0 {
                    let next = tet.nb[k];
                    if next == NONE {
                        return Err(Error::Degenerate("point escaped the enclosing tetrahedron".into()));
                    }
                    t = next;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return Ok(t);
            }
        }
        // walk failed to converge; fall back to scanning every tetrahedron
        (0..self.tets.len())
            .find(|&t| {
                let tet = &self.tets[t];
                tet.alive && (0..4).all(|k| self.orient_with(&tet.v, k, p) >= 0.0)
            })
            .ok_or_else(|| Error::Degenerate("could not locate point".into()))
    }

    fn in_sphere(&self, t: usize, p: usize) -> bool {
        let v = &self.tets[t].v;
        let pt = &self.pts;
        insphere(c3(&pt[v[0]]), c3(&pt[v[1]]), c3(&pt[v[2]]), c3(&pt[v[3]]), c3(&pt[p])) > 0.0
    }

    fn alloc(&mut self, tet: Tet) -> usize {
        if let Some(slot) = self.free.pop() {
            self.tets[slot] = tet;
            slot
        } else {
            self.tets.push(tet);
            self.mark.push(0);
            self.tets.len() - 1
        }
    }

    fn insert(&mut self, p: usize) -> Result<()> {
        let start = self.locate(p)?;
        self.stamp += 2;
        let in_cavity = self.stamp;
        let rejected = self.stamp + 1;
        let mut cavity = vec![start];
        self.mark[start] = in_cavity;
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for k in 0..4 {
                let n = self.tets[t].nb[k];
                if n == NONE || self.mark[n] == in_cavity || self.mark[n] == rejected {
                    continue;
                }
                if self.in_sphere(n, p) {
                    self.mark[n] = in_cavity;
                    cavity.push(n);
                    stack.push(n);
                } else {
                    self.mark[n] = rejected;
                }
            }
        }

        let mut faces = Vec::new();
        for &t in &cavity {
            let tet = &self.tets[t];
            for k in 0..4 {
                let n = tet.nb[k];
                if n != NONE && self.mark[n] == in_cavity {
                    continue;
                }
                let mut v = tet.v;
                v[k] = p;
                if orient(&self.pts[v[0]], &self.pts[v[1]], &self.pts[v[2]], &self.pts[v[3]]) <= 0.0 {
                    return Err(Error::Degenerate("cavity is not star-shaped".into()));
                }
                faces.push(BoundaryFace { v, slot: k, outer: n });
            }
        }

        for &t in &cavity {
            self.tets[t].alive = false;
            self.free.push(t);
        }

        let mut pending: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(faces.len() * 2);
        let mut created = Vec::with_capacity(faces.len());
        for face in faces {
            let mut nb = [NONE; 4];
            nb[face.slot] = face.outer;
            let nt = self.alloc(Tet {
                v: face.v,
                nb,
                alive: true,
            });
            created.push(nt);
            if face.outer != NONE {
                // the shared face's opposite vertex in `outer` is the one not on it
                let outer = &mut self.tets[face.outer];
                let j = (0..4)
                    .find(|&j| !face.v.contains(&outer.v[j]))
                    .expect("outer tetrahedron shares a face");
                outer.nb[j] = nt;
            }
            for j in 0..4 {
                if j == face.slot {
                    continue;
                }
                let mut others = [NONE; 2];
                let mut c = 0;
                for (m, &vm) in face.v.iter().enumerate() {
                    if m != j && m != face.slot {
                        others[c] = vm;
                        c += 1;
                    }
                }
                let key = (others[0].min(others[1]), others[0].max(others[1]));
                match pending.remove(&key) {
                    Some((ot, oj)) => {
                        self.tets[nt].nb[j] = ot;
                        self.tets[ot].nb[oj] = nt;
                    }
                    None => {
                        pending.insert(key, (nt, j));
                    }
                }
            }
        }
        if !pending.is_empty() {
            return Err(Error::Degenerate("cavity boundary is not closed".into()));
        }
        self.last = created[0];
        Ok(())
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-point offset in `[-1, 1]^3`.
fn jitter_direction(index: usize) -> Point3 {
    [0u64, 1, 2].map(|axis| {
        let h = splitmix((index as u64) * 3 + axis);
        (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    })
}

fn morton_order(pts: &[Point3]) -> Vec<usize> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let spread = |x: u64| {
        let mut x = x & 0x1f_ffff;
        x = (x | x << 32) & 0x1f_0000_0000_ffff;
        x = (x | x << 16) & 0x1f_0000_ff00_00ff;
        x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
        x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
        x = (x | x << 2) & 0x1249_2492_4924_9249;
        x
    };
    let code = |p: &Point3| {
        let q = |a: usize| {
            let span = (hi[a] - lo[a]).max(1e-300);
            (((p[a] - lo[a]) / span) * 1_048_575.0) as u64
        };
        spread(q(0)) | spread(q(1)) << 1 | spread(q(2)) << 2
    };
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_key(|&i| (code(&pts[i]), i));
    order
}

/// Tetrahedralizes points that are known to be distinct and not coplanar.
fn tetrahedralize_distinct(pts: &[Point3]) -> Result<Vec<[usize; 4]>> {
    let order = morton_order(pts);
    let mut last_err = None;
    for attempt in 0..=MAX_RETRIES {
        let coords: Vec<Point3> = if attempt == 0 {
            pts.to_vec()
        } else {
            let eps = JITTER_BASE * 10f64.powi(attempt as i32 - 1);
            pts.iter()
                .enumerate()
                .map(|(i, p)| {
                    let d = jitter_direction(i);
                    [p[0] + eps * d[0], p[1] + eps * d[1], p[2] + eps * d[2]]
                })
                .collect()
        };
        let n = coords.len();
        let mut mesh = Mesh::new(coords);
        let outcome = order.iter().try_for_each(|&i| mesh.insert(i));
        match outcome {
            Ok(()) => {
                return Ok(mesh
                    .tets
                    .iter()
                    .filter(|t| t.alive && t.v.iter().all(|&v| v < n))
                    .map(|t| t.v)
                    .collect());
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Degenerate(format!(
        "Delaunay construction failed after {MAX_RETRIES} perturbation retries: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

struct Deduped {
    unique: Vec<Point3>,
    /// original index of each unique point
    original: Vec<usize>,
    /// (duplicate original index, representative original index)
    duplicates: Vec<(usize, usize)>,
}

fn dedupe(points: &[Point3]) -> Deduped {
    let mut seen: HashMap<[u64; 3], usize> = HashMap::with_capacity(points.len());
    let mut out = Deduped {
        unique: Vec::new(),
        original: Vec::new(),
        duplicates: Vec::new(),
    };
    for (i, p) in points.iter().enumerate() {
        // +0.0 so that -0.0 and 0.0 hash alike
        let key = p.map(|v| (v + 0.0).to_bits());
        match seen.get(&key) {
            Some(&rep) => out.duplicates.push((i, rep)),
            None => {
                seen.insert(key, i);
                out.unique.push(*p);
                out.original.push(i);
            }
        }
    }
    out
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

enum Dimension {
    Collinear,
    Planar { basis: [usize; 3] },
    Solid,
}

fn affine_dimension(pts: &[Point3]) -> Dimension {
    let p0 = &pts[0];
    let Some(i1) = (1..pts.len()).max_by(|&a, &b| dot(&sub(&pts[a], p0), &sub(&pts[a], p0)).total_cmp(&dot(&sub(&pts[b], p0), &sub(&pts[b], p0)))) else {
        return Dimension::Collinear;
    };
    let d1 = sub(&pts[i1], p0);
    let area = |i: usize| {
        let c = cross(&d1, &sub(&pts[i], p0));
        dot(&c, &c)
    };
    let i2 = (1..pts.len()).max_by(|&a, &b| area(a).total_cmp(&area(b))).unwrap();
    if area(i2) == 0.0 {
        return Dimension::Collinear;
    }
    let plane = |q: &Point3| orient(p0, &pts[i1], &pts[i2], q);
    if pts.iter().any(|q| plane(q) != 0.0) {
        Dimension::Solid
    } else {
        Dimension::Planar { basis: [0, i1, i2] }
    }
}

fn planar_edges(pts: &[Point3], basis: [usize; 3]) -> Result<Vec<(usize, usize)>> {
    let o = pts[basis[0]];
    let u = sub(&pts[basis[1]], &o);
    let u_len = dot(&u, &u).sqrt();
    let u = u.map(|x| x / u_len);
    let w = cross(&u, &sub(&pts[basis[2]], &o));
    let v = cross(&w, &u);
    let v_len = dot(&v, &v).sqrt();
    let v = v.map(|x| x / v_len);

    // an axis-aligned plane projects exactly by dropping its constant axis,
    // which keeps collinear boundary points collinear
    let normal = cross(&u, &v);
    let axis_aligned = (0..3).find(|&a| (0..3).all(|b| b == a || normal[b] == 0.0));
    let project = |d: &Point3| match axis_aligned {
        Some(0) => Point2::new(d[1], d[2]),
        Some(1) => Point2::new(d[0], d[2]),
        Some(_) => Point2::new(d[0], d[1]),
        None => Point2::new(dot(d, &u), dot(d, &v)),
    };

    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut vertex_owner: Vec<usize> = Vec::with_capacity(pts.len());
    let mut edges = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let d = sub(p, &o);
        let handle = tri
            .insert(project(&d))
            .map_err(|e| Error::Degenerate(format!("planar triangulation: {e:?}")))?;
        let h = handle.index();
        if h < vertex_owner.len() {
            // projected onto an existing vertex: attach to it
            edges.push((vertex_owner[h], i));
        } else {
            vertex_owner.push(i);
        }
    }
    for e in tri.undirected_edges() {
        let [a, b] = e.vertices();
        edges.push((vertex_owner[a.fix().index()], vertex_owner[b.fix().index()]));
    }
    Ok(edges)
}

/// Delaunay tetrahedra over the original point indices. Duplicate points are
/// represented by their first occurrence. Fails for fewer than 4 distinct
/// points or for coplanar input.
pub fn delaunay_tetrahedra(points: &[Point3]) -> Result<Vec<[usize; 4]>> {
    let d = dedupe(points);
    if d.unique.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 distinct points, got {}",
            d.unique.len()
        )));
    }
    match affine_dimension(&d.unique) {
        Dimension::Solid => {}
        _ => return Err(Error::Degenerate("points are coplanar".into())),
    }
    let tets = tetrahedralize_distinct(&d.unique)?;
    Ok(tets.into_iter().map(|t| t.map(|v| d.original[v])).collect())
}

pub(crate) fn delaunay_edges(points: &[Point3]) -> Result<Vec<(usize, usize)>> {
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "Delaunay graph needs at least 4 points, got {}",
            points.len()
        )));
    }
    let d = dedupe(points);
    let mut edges: Vec<(usize, usize)> = d.duplicates.clone();
    if d.unique.len() < 3 {
        return Err(Error::Degenerate("fewer than 3 distinct points".into()));
    }
    match affine_dimension(&d.unique) {
        Dimension::Collinear => return Err(Error::Degenerate("points are collinear".into())),
        Dimension::Planar { basis } => {
            for (a, b) in planar_edges(&d.unique, basis)? {
                edges.push((d.original[a], d.original[b]));
            }
        }
        Dimension::Solid => {
            for t in tetrahedralize_distinct(&d.unique)? {
                for a in 0..4 {
                    for b in a + 1..4 {
                        edges.push((d.original[t[a]], d.original[t[b]]));
                    }
                }
            }
        }
    }
    Ok(edges)
}
