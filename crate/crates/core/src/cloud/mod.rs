//! Point-cloud data model, RGB-D back-projection and file ingestion.

mod image_io;
mod ply;

use std::path::Path;

pub use image_io::{load_color_image, load_depth_image, load_label_image, ColorImage, DepthImage};
pub use ply::{load_ply, write_ply, write_segmented_ply, label_color, PlyEncoding, PlyOptions, PlyPrecision};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];
pub type Rgb = [f64; 3];

/// Number of bins in an FPFH histogram.
pub const FPFH_BINS: usize = 33;

pub type Fpfh = [f64; FPFH_BINS];

/// Color assigned to points whose source carries no color.
pub const DEFAULT_COLOR: Rgb = [0.5, 0.5, 0.5];

const UNIT_TOLERANCE: f64 = 1e-6;
const NO_POINT: u32 = u32::MAX;

/// Bidirectional mapping between image pixels and cloud points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMapping {
    width: usize,
    height: usize,
    pixel_to_point: Vec<u32>,
    point_to_pixel: Vec<(u32, u32)>,
}

impl GridMapping {
    /// Builds the mapping from each point's `(row, col)` pixel.
    pub fn new(width: usize, height: usize, point_to_pixel: Vec<(usize, usize)>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidCloud("grid dimensions must be positive".into()));
        }
        if point_to_pixel.len() >= NO_POINT as usize {
            return Err(Error::InvalidCloud("too many points for a grid mapping".into()));
        }
        let mut pixel_to_point = vec![NO_POINT; width * height];
        let mut compact = Vec::with_capacity(point_to_pixel.len());
        for (idx, &(row, col)) in point_to_pixel.iter().enumerate() {
            if row >= height || col >= width {
                return Err(Error::InvalidCloud(format!(
                    "point {idx} maps to pixel ({row}, {col}) outside a {width}x{height} grid"
                )));
            }
            let slot = &mut pixel_to_point[row * width + col];
            if *slot != NO_POINT {
                return Err(Error::InvalidCloud(format!(
                    "points {} and {idx} share pixel ({row}, {col})",
                    *slot
                )));
            }
            *slot = idx as u32;
            compact.push((row as u32, col as u32));
        }
        Ok(GridMapping {
            width,
            height,
            pixel_to_point,
            point_to_pixel: compact,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_points(&self) -> usize {
        self.point_to_pixel.len()
    }

    /// Point index at `(row, col)`, or `None` for an invalid pixel.
    pub fn point_at(&self, row: usize, col: usize) -> Option<usize> {
        match self.pixel_to_point[row * self.width + col] {
            NO_POINT => None,
            p => Some(p as usize),
        }
    }

    /// `(row, col)` of a point.
    pub fn pixel_of(&self, point: usize) -> (usize, usize) {
        let (r, c) = self.point_to_pixel[point];
        (r as usize, c as usize)
    }
}

/// Pinhole camera parameters used for depth back-projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Meters per raw depth unit.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    /// Millimeter raw depth, the common 16-bit depth PNG convention.
    pub const DEFAULT_DEPTH_SCALE: f64 = 0.001;

    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, depth_scale: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(fx) || !ok(fy) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !ok(depth_scale) {
            return Err(Error::InvalidParameter(format!(
                "depth_scale must be positive, got {depth_scale}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidParameter("principal point must be finite".into()));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            depth_scale,
        })
    }

    /// Color-camera intrinsics of the NYU Depth V2 Kinect rig.
    pub fn nyu() -> Self {
        CameraIntrinsics {
            fx: 5.188_579_011_745_019e2,
            fy: 5.194_696_111_212_749e2,
            cx: 3.255_824_494_111_903e2,
            cy: 2.537_361_663_340_047e2,
            depth_scale: Self::DEFAULT_DEPTH_SCALE,
        }
    }

    /// Parses whitespace-separated `fx fy cx cy depth_scale`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
            .collect::<std::result::Result<_, _>>()?;
        if values.len() != 5 {
            return Err(format!(
                "expected 5 values (fx fy cx cy depth_scale), found {}",
                values.len()
            ));
        }
        CameraIntrinsics::new(values[0], values[1], values[2], values[3], values[4])
            .map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    pub fn to_text(&self) -> String {
        format!(
            "{} {} {} {} {}\n",
            self.fx, self.fy, self.cx, self.cy, self.depth_scale
        )
    }

    /// Projects a camera-frame point to continuous pixel coordinates `(u, v)`.
    pub fn project(&self, p: Point3) -> (f64, f64) {
        (
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        )
    }
}

/// A colored point cloud with optional per-point descriptors.
///
/// Immutable once built; descriptors are attached through the `with_*`
/// builders, which validate their invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3>,
    colors: Vec<Rgb>,
    normals: Option<Vec<Point3>>,
    fpfh: Option<Vec<Fpfh>>,
    grid: Option<GridMapping>,
    viewpoint: Option<Point3>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>, colors: Vec<Rgb>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidCloud("cloud must contain at least one point".into()));
        }
        if colors.len() != positions.len() {
            return Err(Error::InvalidCloud(format!(
                "{} positions but {} colors",
                positions.len(),
                colors.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidCloud(format!("position {i} is not finite")));
        }
        if let Some(i) = colors
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidCloud(format!(
                "color {i} has a channel outside [0, 1]"
            )));
        }
        Ok(PointCloud {
            positions,
            colors,
            normals: None,
            fpfh: None,
            grid: None,
            viewpoint: None,
        })
    }

    /// A cloud whose points all carry [`DEFAULT_COLOR`].
    pub fn from_positions(positions: Vec<Point3>) -> Result<Self> {
        let colors = vec![DEFAULT_COLOR; positions.len()];
        Self::new(positions, colors)
    }

    pub fn with_normals(mut self, normals: Vec<Point3>) -> Result<Self> {
        if normals.len() != self.len() {
            return Err(Error::InvalidCloud(format!(
                "{} normals for {} points",
                normals.len(),
                self.len()
            )));
        }
        for (i, n) in normals.iter().enumerate() {
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if (len - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidCloud(format!(
                    "normal {i} has length {len}, expected unit length"
                )));
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_fpfh(mut self, fpfh: Vec<Fpfh>) -> Result<Self> {
        if fpfh.len() != self.len() {
            return Err(Error::InvalidCloud(format!(
                "{} FPFH histograms for {} points",
                fpfh.len(),
                self.len()
            )));
        }
        for (i, h) in fpfh.iter().enumerate() {
            let sum: f64 = h.iter().sum();
            if h.iter().any(|&b| b < 0.0 || !b.is_finite()) || (sum - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidCloud(format!(
                    "FPFH histogram {i} is not a normalized nonnegative histogram (sum {sum})"
                )));
            }
        }
        self.fpfh = Some(fpfh);
        Ok(self)
    }

    pub fn with_grid(mut self, grid: GridMapping) -> Result<Self> {
        if grid.n_points() != self.len() {
            return Err(Error::InvalidCloud(format!(
                "grid maps {} points, cloud has {}",
                grid.n_points(),
                self.len()
            )));
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn with_viewpoint(mut self, viewpoint: Point3) -> Self {
        self.viewpoint = Some(viewpoint);
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false: a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn normals(&self) -> Option<&[Point3]> {
        self.normals.as_deref()
    }

    pub fn fpfh(&self) -> Option<&[Fpfh]> {
        self.fpfh.as_deref()
    }

    pub fn grid(&self) -> Option<&GridMapping> {
        self.grid.as_ref()
    }

    pub fn viewpoint(&self) -> Option<Point3> {
        self.viewpoint
    }
}

/// Back-projects a depth image through a pinhole camera.
///
/// Points are emitted in row-major pixel order; pixels with raw depth 0 are
/// skipped. The result carries the grid mapping and a viewpoint at the
/// camera origin.
pub fn backproject_depth(
    depth: &DepthImage,
    rgb: &ColorImage,
    intr: &CameraIntrinsics,
) -> Result<PointCloud> {
    if depth.width() != rgb.width() || depth.height() != rgb.height() {
        return Err(Error::DimensionMismatch(format!(
            "depth is {}x{}, color is {}x{}",
            depth.width(),
            depth.height(),
            rgb.width(),
            rgb.height()
        )));
    }
    let (w, h) = (depth.width(), depth.height());
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut pixels = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let raw = depth.get(row, col);
            if raw == 0 {
                continue;
            }
            let z = raw as f64 * intr.depth_scale;
            let x = (col as f64 - intr.cx) * z / intr.fx;
            let y = (row as f64 - intr.cy) * z / intr.fy;
            positions.push([x, y, z]);
            let c = rgb.get(row, col);
            colors.push([c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0]);
            pixels.push((row, col));
        }
    }
    if positions.is_empty() {
        return Err(Error::NoValidDepth);
    }
    let grid = GridMapping::new(w, h, pixels)?;
    Ok(PointCloud::new(positions, colors)?
        .with_grid(grid)?
        .with_viewpoint([0.0, 0.0, 0.0]))
}
