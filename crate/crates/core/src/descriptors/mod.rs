//! Per-point descriptors: PCA normals and FPFH histograms.

mod cache;
mod fpfh;

pub use cache::{load_cache, save_cache, DescriptorKind};
pub use fpfh::{compute_fpfh, pair_features};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::spatial::KdTree;

pub const DEFAULT_NORMAL_K: usize = 10;
pub const DEFAULT_FPFH_K: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEstimate {
    pub direction: Point3,
    /// Smallest-eigenvalue ratio λ0 / (λ0 + λ1 + λ2), in [0, 1/3].
    pub curvature: f64,
    /// All neighbors coincided; `direction` is the (0, 0, 1) placeholder.
    pub degenerate: bool,
}

/// Plane fit over a neighborhood: smallest-eigenvalue eigenvector of the
/// covariance and the curvature ratio. `None` when all points coincide.
pub fn fit_plane(points: &[Point3]) -> Option<(Point3, f64)> {
    let n = points.len() as f64;
    let mut mean = Vector3::zeros();
    for p in points {
        mean += Vector3::from(*p);
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let trace = cov.trace();
    if !(trace > 0.0) {
        return None;
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &l)| (i, l.max(0.0)))
        .expect("three eigenvalues");
    let v = eig.eigenvectors.column(imin).normalize();
    let sum: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let curvature = if sum > 0.0 { (lmin / sum).min(1.0 / 3.0) } else { 0.0 };
    Some(([v[0], v[1], v[2]], curvature))
}

/// PCA normals over each point plus its `k - 1` nearest neighbors. With a
/// viewpoint, each normal is flipped to face it.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: Option<Point3>) -> Result<Vec<NormalEstimate>> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("normal neighborhood k must be at least 3, got {k}")));
    }
    if cloud.len() <= k {
        return Err(Error::InvalidParameter(format!(
            "normal estimation with k={k} needs more than {k} points, cloud has {}",
            cloud.len()
        )));
    }
    let pts = cloud.positions();
    let tree = KdTree::build(pts);
    Ok((0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut hood = Vec::with_capacity(k);
            hood.push(pts[i]);
            hood.extend(tree.nearest(&pts[i], k - 1, Some(i)).iter().map(|n| pts[n.index]));
            match fit_plane(&hood) {
                None => NormalEstimate {
                    direction: [0.0, 0.0, 1.0],
                    curvature: 0.0,
                    degenerate: true,
                },
                Some((mut dir, curvature)) => {
                    if let Some(vp) = viewpoint {
                        let to_vp = [vp[0] - pts[i][0], vp[1] - pts[i][1], vp[2] - pts[i][2]];
                        if to_vp[0] * dir[0] + to_vp[1] * dir[1] + to_vp[2] * dir[2] < 0.0 {
                            dir = dir.map(|x| -x);
                        }
                    }
                    NormalEstimate {
                        direction: dir,
                        curvature,
                        degenerate: false,
                    }
                }
            }
        })
        .collect())
}

pub fn directions(normals: &[NormalEstimate]) -> Vec<Point3> {
    normals.iter().map(|n| n.direction).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn plane_cloud(n: usize, seed: u64, sigma: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let pts = (0..n)
            .map(|_| {
                let z = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), z]
            })
            .collect();
        PointCloud::from_positions(pts).unwrap()
    }

    #[test]
    fn exact_plane_faces_viewpoint() {
        let cloud = plane_cloud(20, 1, 0.0);
        for (vp, sign) in [([0.0, 0.0, 10.0], 1.0), ([0.0, 0.0, -10.0], -1.0)] {
            for n in estimate_normals(&cloud, 10, Some(vp)).unwrap() {
                assert!((n.direction[2] - sign).abs() < 1e-6);
                assert!(n.curvature < 1e-9);
            }
        }
    }

    #[test]
    fn noisy_plane_mean_error_below_five_degrees() {
        let cloud = plane_cloud(150, 2, 0.01);
        let normals = estimate_normals(&cloud, 10, None).unwrap();
        let mean: f64 = normals
            .iter()
            .map(|n| n.direction[2].abs().min(1.0).acos().to_degrees())
            .sum::<f64>()
            / normals.len() as f64;
        assert!(mean < 5.0, "mean angular error {mean} degrees");
    }

    #[test]
    fn coincident_neighborhood_is_flagged() {
        let mut pts = vec![[1.0, 1.0, 1.0]; 6];
        pts.extend((0..10).map(|i| [10.0 + i as f64, 0.0, (i * i) as f64]));
        let cloud = PointCloud::from_positions(pts).unwrap();
        let normals = estimate_normals(&cloud, 4, None).unwrap();
        assert!(normals[0].degenerate);
        assert_eq!(normals[0].direction, [0.0, 0.0, 1.0]);
        assert_eq!(normals[0].curvature, 0.0);
        assert!(!normals[10].degenerate);
    }

    #[test]
    fn parameters_are_checked() {
        let cloud = plane_cloud(5, 3, 0.0);
        assert!(estimate_normals(&cloud, 2, None).is_err());
        assert!(estimate_normals(&cloud, 5, None).is_err());
    }

    // Cyclic Jacobi rotations on a symmetric 3x3 matrix.
    fn jacobi_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for _ in 0..100 {
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        ([a[0][0], a[1][1], a[2][2]], v)
    }

    #[test]
    fn plane_fit_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(4..200);
            let pts: Vec<Point3> = (0..n)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3)])
                .collect();
            let mean = [0, 1, 2].map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / n as f64);
            let mut cov = [[0.0; 3]; 3];
            for p in &pts {
                for r in 0..3 {
                    for c in 0..3 {
                        cov[r][c] += (p[r] - mean[r]) * (p[c] - mean[c]) / n as f64;
                    }
                }
            }
            let (vals, vecs) = jacobi_eigen(cov);
            let imin = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
            let expect = [vecs[0][imin], vecs[1][imin], vecs[2][imin]];
            let (dir, curv) = fit_plane(&pts).unwrap();
            let dot: f64 = (0..3).map(|a| dir[a] * expect[a]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-9);
            assert!((curv - vals[imin] / vals.iter().sum::<f64>()).abs() < 1e-9);
        }
    }

    #[test]
    fn rigid_motion_rotates_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3> = (0..300)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                [x, y, 0.3 * x * x - 0.2 * y * y + 0.1 * x * y]
            })
            .collect();
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let shift = Vector3::new(4.0, -2.0, 7.5);
        let moved: Vec<Point3> = pts
            .iter()
            .map(|p| {
                let q = rot * Vector3::from(*p) + shift;
                [q[0], q[1], q[2]]
            })
            .collect();
        let vp = Vector3::new(0.0, 0.0, 5.0);
        let vp_moved = rot * vp + shift;
        let a = estimate_normals(&PointCloud::from_positions(pts).unwrap(), 10, Some([0.0, 0.0, 5.0])).unwrap();
        let b = estimate_normals(
            &PointCloud::from_positions(moved).unwrap(),
            10,
            Some([vp_moved[0], vp_moved[1], vp_moved[2]]),
        )
        .unwrap();
        for (na, nb) in a.iter().zip(&b) {
            let expect = rot * Vector3::from(na.direction);
            let got = Vector3::from(nb.direction);
            assert!(expect.angle(&got) < 1e-5);
            assert!((na.curvature - nb.curvature).abs() < 1e-6);
        }
    }
}
