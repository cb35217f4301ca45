//! Fast Point Feature Histograms: three Darboux-frame angle features per
//! point pair, 11 bins each.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cloud::{Fpfh, Point3, PointCloud, FPFH_BINS};
use crate::error::{Error, Result};
use crate::spatial::{KdTree, Neighbor};

const SUB_BINS: usize = FPFH_BINS / 3;

/// Angle difference (radians) below which the source-point choice is a tie.
const SWAP_TIE: f64 = 1e-9;

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Angle features `(f1, f2, f3)` of an oriented point pair, with f1 in
/// [-π, π] and f2, f3 in [-1, 1]. The source point of the frame is the one
/// whose normal makes the smaller angle with the connecting line; on a tie,
/// the one that makes f3 non-negative. `None`
/// for coincident points or when the frame is undefined.
pub fn pair_features(p1: &Point3, n1: &Point3, p2: &Point3, n2: &Point3) -> Option<[f64; 3]> {
    let mut dp = sub(p2, p1);
    let len = dot(&dp, &dp).sqrt();
    if len == 0.0 {
        return None;
    }
    let a1 = dot(n1, &dp) / len;
    let a2 = dot(n2, &dp) / len;
    let (g1, g2) = (a1.abs().min(1.0).acos(), a2.abs().min(1.0).acos());
    // equal angles (parallel normals) would leave the sign of f3 to rounding
    let swap = if (g1 - g2).abs() <= SWAP_TIE {
        a1 < 0.0
    } else {
        g1 > g2
    };
    let (s, t, f3) = if swap {
        dp = dp.map(|x| -x);
        (n2, n1, -a2)
    } else {
        (n1, n2, a1)
    };
    let v = cross(&dp, s);
    let v_len = dot(&v, &v).sqrt();
    if v_len == 0.0 {
        return None;
    }
    let v = v.map(|x| x / v_len);
    let w = cross(s, &v);
    let f2 = dot(&v, t);
    let f1 = dot(&w, t).atan2(dot(s, t));
    Some([f1, f2.clamp(-1.0, 1.0), f3.clamp(-1.0, 1.0)])
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * SUB_BINS as f64).floor();
    (b.max(0.0) as usize).min(SUB_BINS - 1)
}

/// Simplified histogram: features between the point and each neighbor,
/// each 11-bin sub-histogram normalized to sum 1. Uniform when no pair is
/// valid.
fn spfh(i: usize, hood: &[Neighbor], pts: &[Point3], normals: &[Point3]) -> Fpfh {
    let mut h = [0.0; FPFH_BINS];
    let mut valid = 0usize;
    for nb in hood {
        if let Some(f) = pair_features(&pts[i], &normals[i], &pts[nb.index], &normals[nb.index]) {
            h[bin(f[0], -PI, PI)] += 1.0;
            h[SUB_BINS + bin(f[1], -1.0, 1.0)] += 1.0;
            h[2 * SUB_BINS + bin(f[2], -1.0, 1.0)] += 1.0;
            valid += 1;
        }
    }
    if valid == 0 {
        return [1.0 / SUB_BINS as f64; FPFH_BINS];
    }
    h.map(|x| x / valid as f64)
}

/// FPFH over `k` nearest neighbors: the point's own simplified histogram
/// plus the distance-weighted mean of its neighbors' (weight 1/distance),
/// normalized to total mass 1.
pub fn compute_fpfh(cloud: &PointCloud, normals: &[Point3], k: usize) -> Result<Vec<Fpfh>> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("FPFH neighborhood k must be at least 3, got {k}")));
    }
    if normals.len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} normals for {} points",
            normals.len(),
            cloud.len()
        )));
    }
    if cloud.len() < 2 {
        return Err(Error::InvalidParameter("FPFH needs at least 2 points".into()));
    }
    let pts = cloud.positions();
    let tree = KdTree::build(pts);
    let hoods: Vec<Vec<Neighbor>> = (0..pts.len())
        .into_par_iter()
        .map(|i| tree.nearest(&pts[i], k, Some(i)))
        .collect();
    let simple: Vec<Fpfh> = (0..pts.len())
        .into_par_iter()
        .map(|i| spfh(i, &hoods[i], pts, normals))
        .collect();
    Ok((0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut h = simple[i];
            let scale = 1.0 / hoods[i].len() as f64;
            for nb in &hoods[i] {
                let d = nb.dist2.sqrt();
                if d == 0.0 {
                    continue;
                }
                let w = scale / d;
                for (acc, x) in h.iter_mut().zip(&simple[nb.index]) {
                    *acc += w * x;
                }
            }
            let total: f64 = h.iter().sum();
            h.map(|x| x / total)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{directions, estimate_normals};
    use crate::weights::fpfh_weight;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coplanar_pairs_have_zero_features() {
        let n = [0.0, 0.0, 1.0];
        let f = pair_features(&[0.0; 3], &n, &[0.3, -0.7, 0.0], &n).unwrap();
        assert_eq!(f, [0.0, 0.0, 0.0]);
        assert!(pair_features(&[1.0; 3], &n, &[1.0; 3], &n).is_none());
    }

    #[test]
    fn features_are_symmetric_under_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut unit = || {
                let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
                [v[0], v[1], v[2]]
            };
            let (n1, n2) = (unit(), unit());
            let p2 = unit();
            let a = pair_features(&[0.0; 3], &n1, &p2, &n2).unwrap();
            let b = pair_features(&p2, &n2, &[0.0; 3], &n1).unwrap();
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parallel_normals_pick_one_orientation() {
        let n = [0.0, 0.6, 0.8];
        let p2 = [1.0, 0.0, 0.5];
        let a = pair_features(&[0.0; 3], &n, &p2, &n).unwrap();
        let b = pair_features(&p2, &n, &[0.0; 3], &n).unwrap();
        assert_eq!(a, b);
        assert!(a[2] > 0.0);
    }

    #[test]
    fn plane_mass_sits_in_three_bins() {
        let mut pts = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                pts.push([i as f64 * 0.1, j as f64 * 0.1 + 0.01 * i as f64, 0.0]);
            }
        }
        let cloud = PointCloud::from_positions(pts).unwrap();
        let normals = vec![[0.0, 0.0, 1.0]; cloud.len()];
        let hist = compute_fpfh(&cloud, &normals, 15).unwrap();
        for h in &hist {
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let support: Vec<usize> = (0..FPFH_BINS).filter(|&b| h[b] > 0.0).collect();
            assert_eq!(support, vec![5, 16, 27]);
            assert!(h.iter().zip(&hist[0]).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    fn crease_cloud() -> (PointCloud, Vec<bool>) {
        // two orthogonal planes meeting along the y axis
        let mut pts = Vec::new();
        let mut near = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let y = j as f64 * 0.05;
                let s = 0.025 + i as f64 * 0.05;
                pts.push([s, y, 0.0]);
                pts.push([0.0, y, s]);
                near.push(i == 0);
                near.push(i == 0);
            }
        }
        (PointCloud::from_positions(pts).unwrap().with_viewpoint([2.0, 0.5, 2.0]), near)
    }

    #[test]
    fn crease_histograms_differ_from_interior() {
        let (cloud, near) = crease_cloud();
        let normals = estimate_normals(&cloud, 10, cloud.viewpoint()).unwrap();
        let hist = compute_fpfh(&cloud, &directions(&normals), 15).unwrap();
        let interior: Vec<usize> = (0..cloud.len())
            .filter(|&i| {
                let p = cloud.positions()[i];
                let s = p[0].max(p[2]);
                s > 0.3 && s < 0.7 && p[1] > 0.3 && p[1] < 0.7
            })
            .collect();
        let edge: Vec<usize> = (0..cloud.len())
            .filter(|&i| near[i] && cloud.positions()[i][1] > 0.3 && cloud.positions()[i][1] < 0.7)
            .collect();
        let baseline = interior
            .iter()
            .flat_map(|&a| interior.iter().map(move |&b| (a, b)))
            .map(|(a, b)| fpfh_weight(&hist[a], &hist[b]))
            .fold(0.0, f64::max);
        for &e in &edge {
            for &i in &interior {
                assert!(fpfh_weight(&hist[e], &hist[i]) > 0.1, "baseline {baseline}");
            }
        }
        assert!(baseline < 0.1);
    }

    #[test]
    fn rigid_motion_leaves_histograms_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<Point3> = (0..250)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                [x, y, 0.4 * (2.0 * x).sin() * y]
            })
            .collect();
        let rot = Rotation3::from_euler_angles(-0.7, 0.4, 1.9);
        let shift = Vector3::new(-3.0, 1.0, 2.0);
        let tf = |p: &Point3| {
            let q = rot * Vector3::from(*p) + shift;
            [q[0], q[1], q[2]]
        };
        let vp = [0.0, 0.0, 6.0];
        let a = PointCloud::from_positions(pts.clone()).unwrap();
        let b = PointCloud::from_positions(pts.iter().map(tf).collect()).unwrap();
        let na = directions(&estimate_normals(&a, 10, Some(vp)).unwrap());
        let nb = directions(&estimate_normals(&b, 10, Some(tf(&vp))).unwrap());
        let ha = compute_fpfh(&a, &na, 15).unwrap();
        let hb = compute_fpfh(&b, &nb, 15).unwrap();
        for (i, (x, y)) in ha.iter().zip(&hb).enumerate() {
            for bin in 0..FPFH_BINS {
                assert!((x[bin] - y[bin]).abs() < 1e-6, "point {i} bin {bin}: {} vs {}", x[bin], y[bin]);
            }
        }
    }
}
