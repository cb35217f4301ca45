//! Static 3D k-d tree for exact k-nearest and fixed-radius queries.
//!
//! Results are exact and deterministic: neighbors are ordered by
//! `(squared distance, index)`, so equidistant points resolve to the smaller
//! index.

use crate::cloud::Point3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn key(&self) -> (f64, usize) {
        (self.dist2, self.index)
    }

    fn before(&self, other: &Neighbor) -> bool {
        self.key() < other.key()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<Node>,
    // points permuted into leaf order, with their original indices
    points: Vec<Point3>,
    ids: Vec<usize>,
}

#[inline]
fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build_node(points, &mut ids, 0, &mut nodes);
        }
        let sorted = ids.iter().map(|&i| points[i]).collect();
        KdTree {
            nodes,
            points: sorted,
            ids,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, nearest first, optionally ignoring
    /// the point with index `skip`.
    pub fn nearest(&self, query: &Point3, k: usize, skip: Option<usize>) -> Vec<Neighbor> {
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.nearest_in(0, query, k, skip, &mut best);
        }
        best
    }

    fn nearest_in(&self, node: usize, q: &Point3, k: usize, skip: Option<usize>, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let index = self.ids[slot];
                    if Some(index) == skip {
                        continue;
                    }
                    let cand = Neighbor {
                        index,
                        dist2: dist2(&self.points[slot], q),
                    };
                    if best.len() == k {
                        if !cand.before(&best[k - 1]) {
                            continue;
                        }
                        best.pop();
                    }
                    let at = best.partition_point(|n| n.before(&cand));
                    best.insert(at, cand);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, k, skip, best);
                // `<=` keeps equidistant candidates with smaller indices reachable
                if best.len() < k || diff * diff <= best[k - 1].dist2 {
                    self.nearest_in(far, q, k, skip, best);
                }
            }
        }
    }

    /// Indices of all points strictly closer than `radius`, ascending.
    pub fn within(&self, query: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.within_in(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_in(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    if dist2(&self.points[slot], q) < r2 {
                        out.push(self.ids[slot]);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.within_in(near, q, r2, out);
                if diff * diff < r2 {
                    self.within_in(far, q, r2, out);
                }
            }
        }
    }
}

fn build_node(points: &[Point3], ids: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return me;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in ids.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[axis] <= lo[axis] {
        // all points coincide
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + ids.len(),
        });
        return me;
    }
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let value = points[ids[mid]][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_ids, right_ids) = ids.split_at_mut(mid);
    let left = build_node(points, left_ids, offset, nodes);
    let right = build_node(points, right_ids, offset + mid, nodes);
    nodes[me] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(i, p)| (dist2(p, q), i))
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.into_iter().take(k).map(|(d, i)| (i, d)).collect()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, grid: bool) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                if grid {
                    // coarse lattice creates many exact ties
                    [0; 3].map(|_: i32| rng.random_range(0..5) as f64)
                } else {
                    [0; 3].map(|_: i32| rng.random_range(-1.0..1.0))
                }
            })
            .collect()
    }

    #[test]
    fn knn_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let pts = random_points(&mut rng, 300, trial % 2 == 0);
            let tree = KdTree::build(&pts);
            for i in (0..pts.len()).step_by(7) {
                for k in [1, 4, 9] {
                    let got: Vec<(usize, f64)> = tree
                        .nearest(&pts[i], k, Some(i))
                        .iter()
                        .map(|n| (n.index, n.dist2))
                        .collect();
                    assert_eq!(got, brute_knn(&pts, &pts[i], k, Some(i)));
                }
            }
        }
    }

    #[test]
    fn radius_is_strict() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0]];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.within(&pts[0], 1.0), vec![0, 2]);
        assert_eq!(tree.within(&pts[0], 1.0 + 1e-12), vec![0, 1, 2]);
    }

    #[test]
    fn coincident_points() {
        let pts = vec![[1.0, 1.0, 1.0]; 40];
        let tree = KdTree::build(&pts);
        let n = tree.nearest(&pts[5], 3, Some(5));
        assert_eq!(n.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(tree.within(&pts[0], 0.1).len(), 40);
    }

    proptest! {
        #[test]
        fn radius_matches_brute_force(seed in 0u64..500, r in 0.01f64..0.8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 150, seed % 3 == 0);
            let tree = KdTree::build(&pts);
            let q = pts[(seed as usize) % pts.len()];
            let expect: Vec<usize> = (0..pts.len()).filter(|&j| dist2(&pts[j], &q) < r * r).collect();
            prop_assert_eq!(tree.within(&q, r), expect);
        }
    }
}
