//! Synthetic RGB-D scenes with known ground-truth segmentations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::{CameraIntrinsics, ColorImage, DepthImage};
use crate::eval::LabelImage;

/// Rendered frame: raw depth, color, intrinsics and per-pixel ground truth
/// (unlabeled where depth is missing).
#[derive(Debug, Clone)]
pub struct SyntheticFrame {
    pub depth: DepthImage,
    pub rgb: ColorImage,
    pub intrinsics: CameraIntrinsics,
    pub ground_truth: LabelImage,
}

/// Two walls meeting at a right angle along a vertical crease, seen head-on,
/// painted with one albedo. A shadow edge runs parallel to the crease
/// `shade_offset` pixels away (negative: left of the crease); the shadow is
/// darkest at that edge and brightens with distance from it.
#[derive(Debug, Clone)]
pub struct CornerScene {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Image column of the crease; use a half-integer so it falls between pixels.
    pub crease_col: f64,
    /// Depth of the crease line in meters.
    pub crease_depth: f64,
    pub shade_offset: f64,
    pub albedo: [f64; 3],
    /// Shading factor on the lit side of the shadow edge.
    pub lit: f64,
    /// Shading factor at the darkest line.
    pub dark: f64,
    /// Shading increase per pixel moving away from the darkest line.
    pub shade_slope: f64,
    /// Standard deviation of per-channel color noise, in [0, 1] units.
    pub color_noise: f64,
    /// Standard deviation of depth noise in meters.
    pub depth_noise: f64,
    pub seed: u64,
}

impl Default for CornerScene {
    fn default() -> Self {
        CornerScene {
            width: 160,
            height: 120,
            focal: 150.0,
            crease_col: 79.5,
            crease_depth: 3.0,
            shade_offset: -10.0,
            albedo: [0.85, 0.8, 0.7],
            lit: 0.9,
            dark: 0.45,
            shade_slope: 0.004,
            color_noise: 0.01,
            depth_noise: 0.001,
            seed: 0,
        }
    }
}

impl CornerScene {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::new(
            self.focal,
            self.focal,
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
            CameraIntrinsics::DEFAULT_DEPTH_SCALE,
        )
        .expect("positive focal length")
    }

    /// Ground-truth wall id of a column: 0 left of the crease, 1 right.
    pub fn wall_of(&self, col: usize) -> u32 {
        (col as f64 > self.crease_col) as u32
    }

    /// Depth in meters along the ray through column `col`.
    pub fn depth_at(&self, col: usize) -> f64 {
        let intr = self.intrinsics();
        let a = (col as f64 - intr.cx) / intr.fx;
        let x_c = (self.crease_col - intr.cx) / intr.fx * self.crease_depth;
        // walls z = z0 -/+ (x - x_c), i.e. a concave corner
        if self.wall_of(col) == 1 {
            (self.crease_depth + x_c) / (1.0 + a)
        } else {
            (self.crease_depth - x_c) / (1.0 - a)
        }
    }

    pub fn shading_at(&self, col: usize) -> f64 {
        let edge = self.crease_col + self.shade_offset;
        let u = col as f64;
        // shadow lies on the crease side of the edge
        let in_shadow = if self.shade_offset < 0.0 { u >= edge } else { u <= edge };
        if in_shadow {
            (self.dark + self.shade_slope * (u - edge).abs()).min(self.lit)
        } else {
            self.lit
        }
    }

    pub fn render(&self) -> SyntheticFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let color_noise = Normal::new(0.0, self.color_noise.max(0.0)).expect("finite sigma");
        let depth_noise = Normal::new(0.0, self.depth_noise.max(0.0)).expect("finite sigma");
        let intr = self.intrinsics();
        let mut depth = Vec::with_capacity(self.width * self.height);
        let mut rgb = Vec::with_capacity(self.width * self.height);
        for _row in 0..self.height {
            for col in 0..self.width {
                let z = self.depth_at(col) + depth_noise.sample(&mut rng);
                depth.push((z / intr.depth_scale).round().clamp(1.0, u16::MAX as f64) as u16);
                let s = self.shading_at(col);
                rgb.push(self.albedo.map(|a| {
                    let v = a * s + color_noise.sample(&mut rng);
                    (v.clamp(0.0, 1.0) * 255.0).round() as u8
                }));
            }
        }
        SyntheticFrame {
            depth: DepthImage::new(self.width, self.height, depth).expect("sized"),
            rgb: ColorImage::new(self.width, self.height, rgb).expect("sized"),
            intrinsics: intr,
            ground_truth: LabelImage::from_fn(self.width, self.height, |_, c| Some(self.wall_of(c))).expect("sized"),
        }
    }
}

/// Ten corner scenes varying crease position, shadow side, albedo and noise.
pub fn corner_suite() -> Vec<CornerScene> {
    let albedos = [
        [0.85, 0.8, 0.7],
        [0.6, 0.7, 0.9],
        [0.9, 0.9, 0.9],
        [0.7, 0.85, 0.6],
        [0.95, 0.75, 0.6],
    ];
    (0..10)
        .map(|i| CornerScene {
            crease_col: 71.5 + 4.0 * (i % 5) as f64,
            shade_offset: if i % 2 == 0 { -10.0 } else { 10.0 },
            albedo: albedos[i % 5],
            color_noise: 0.008 + 0.002 * (i % 3) as f64,
            depth_noise: 0.0005 + 0.0005 * (i % 2) as f64,
            seed: 100 + i as u64,
            ..CornerScene::default()
        })
        .collect()
}

/// Uniformly random 8-bit color image.
pub fn random_rgb_image(width: usize, height: usize, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    ColorImage::new(width, height, data).expect("sized")
}

/// Box-shaped room with two boxes on the floor, viewed from inside, with
/// per-surface colors, texture noise and a sprinkle of missing depth.
/// Ground truth labels each visible surface.
pub fn room_frame(width: usize, height: usize, seed: u64) -> SyntheticFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).expect("finite sigma");
    let depth_noise = Normal::new(0.0, 0.002).expect("finite sigma");
    let f = 525.0 * width as f64 / 640.0;
    let intr = CameraIntrinsics::new(
        f,
        f,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        CameraIntrinsics::DEFAULT_DEPTH_SCALE,
    )
    .expect("positive focal length");

    let jitter = |rng: &mut ChaCha8Rng, v: f64, s: f64| v + rng.random_range(-s..s);
    let room_lo = [jitter(&mut rng, -2.0, 0.3), jitter(&mut rng, -1.4, 0.2), 0.2];
    let room_hi = [jitter(&mut rng, 2.0, 0.3), jitter(&mut rng, 1.2, 0.1), jitter(&mut rng, 4.5, 0.5)];
    let floor = room_hi[1];
    let boxes: Vec<([f64; 3], [f64; 3])> = (0..2)
        .map(|k| {
            let x0 = jitter(&mut rng, if k == 0 { -1.2 } else { 0.4 }, 0.2);
            let z0 = jitter(&mut rng, 2.6 + 0.5 * k as f64, 0.3);
            let h = jitter(&mut rng, 0.7, 0.2);
            ([x0, floor - h, z0], [x0 + jitter(&mut rng, 0.7, 0.1), floor, z0 + 0.6])
        })
        .collect();
    let palette: Vec<[f64; 3]> = (0..6 + 5 * boxes.len())
        .map(|_| [rng.random_range(0.2..0.9), rng.random_range(0.2..0.9), rng.random_range(0.2..0.9)])
        .collect();

    let mut depth = Vec::with_capacity(width * height);
    let mut rgb = Vec::with_capacity(width * height);
    let mut labels = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let dir = [(col as f64 - intr.cx) / intr.fx, (row as f64 - intr.cy) / intr.fy, 1.0];
            // exit face of the room
            let mut best = (f64::INFINITY, 0usize, 0.0);
            for axis in 0..3 {
                if dir[axis] > 0.0 {
                    let t = room_hi[axis] / dir[axis];
                    if t < best.0 {
                        best = (t, 2 * axis + 1, 1.0);
                    }
                } else if dir[axis] < 0.0 {
                    let t = room_lo[axis] / dir[axis];
                    if t < best.0 {
                        best = (t, 2 * axis, 1.0);
                    }
                }
            }
            for (b, (lo, hi)) in boxes.iter().enumerate() {
                let (mut t_in, mut t_out, mut face) = (0.0f64, f64::INFINITY, 0usize);
                for axis in 0..3 {
                    if dir[axis] == 0.0 {
                        if 0.0 < lo[axis] || 0.0 > hi[axis] {
                            t_in = f64::INFINITY;
                        }
                        continue;
                    }
                    let (t0, t1) = (lo[axis] / dir[axis], hi[axis] / dir[axis]);
                    let (near, far) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                    if near > t_in {
                        t_in = near;
                        face = 2 * axis + (t0 > t1) as usize;
                    }
                    t_out = t_out.min(far);
                }
                if t_in <= t_out && t_in > 0.0 && t_in < best.0 {
                    best = (t_in, 6 + 5 * b + face.min(4), 1.0);
                }
            }
            let (t, surface, _) = best;
            let z = t * dir[2];
            let dropped = rng.random_bool(0.01);
            if dropped {
                depth.push(0);
                labels.push(None);
            } else {
                let zn = z + depth_noise.sample(&mut rng);
                depth.push((zn / intr.depth_scale).round().clamp(1.0, u16::MAX as f64) as u16);
                labels.push(Some(surface as u32));
            }
            let base = palette[surface];
            // gentle illumination falloff with depth
            let light = (1.2 - 0.1 * z).clamp(0.5, 1.0);
            rgb.push(base.map(|c| ((c * light + noise.sample(&mut rng)).clamp(0.0, 1.0) * 255.0).round() as u8));
        }
    }
    SyntheticFrame {
        depth: DepthImage::new(width, height, depth).expect("sized"),
        rgb: ColorImage::new(width, height, rgb).expect("sized"),
        intrinsics: intr,
        ground_truth: LabelImage::new(width, height, labels).expect("sized"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::backproject_depth;

    #[test]
    fn corner_walls_meet_at_right_angle() {
        let scene = CornerScene {
            depth_noise: 0.0,
            color_noise: 0.0,
            ..CornerScene::default()
        };
        let frame = scene.render();
        let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics).unwrap();
        let p = |col: usize| cloud.positions()[cloud.grid().unwrap().point_at(60, col).unwrap()];
        let slope = |a: usize, b: usize| {
            let (pa, pb) = (p(a), p(b));
            (pb[2] - pa[2]) / (pb[0] - pa[0])
        };
        // mm depth quantization limits the accuracy
        assert!((slope(10, 60) - 1.0).abs() < 0.02);
        assert!((slope(100, 150) + 1.0).abs() < 0.02);
    }

    #[test]
    fn shadow_is_darkest_at_its_edge() {
        let scene = CornerScene::default();
        let edge = (scene.crease_col + scene.shade_offset).ceil() as usize;
        let darkest = (0..scene.width)
            .min_by(|&a, &b| scene.shading_at(a).total_cmp(&scene.shading_at(b)))
            .unwrap();
        assert_eq!(darkest, edge);
        assert_eq!(((scene.crease_col - darkest as f64).abs()).round(), 10.0);
    }

    #[test]
    fn room_has_surfaces_and_holes() {
        let frame = room_frame(160, 120, 3);
        let labels = frame.ground_truth.distinct_labels();
        assert!(labels.len() >= 5, "{labels:?}");
        assert!(frame.depth.data().iter().any(|&d| d == 0));
        let seen = frame.ground_truth.iter().filter(|l| l.is_some()).count();
        assert_eq!(seen, frame.depth.data().iter().filter(|&&d| d > 0).count());
    }
}
