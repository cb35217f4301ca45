//! Boundary recall and under-segmentation error on 2D label images, and the
//! segment-count sweep.

mod sweep;

pub use sweep::{sweep, write_sweep_csv, SweepPoint, SWEEP_CSV_HEADER};

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::cloud::GridMapping;
use crate::error::{Error, Result};
use crate::merge::Segmentation;

pub const DEFAULT_BOUNDARY_DISTANCE: f64 = 2.0;

/// Per-pixel optional segment label, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<Option<u32>>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<Option<u32>>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        Ok(LabelImage {
            width,
            height,
            labels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Option<u32>) -> Result<Self> {
        let labels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.labels[row * self.width + col]
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<u32>> + '_ {
        self.labels.iter().copied()
    }

    /// Sorted distinct labels.
    pub fn distinct_labels(&self) -> Vec<u32> {
        self.labels
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Treats label 0 as unlabeled.
    pub fn without_zero(mut self) -> Self {
        for l in &mut self.labels {
            if *l == Some(0) {
                *l = None;
            }
        }
        self
    }

    /// Relabels through `f`, e.g. to permute ids.
    pub fn map_labels(&self, f: impl Fn(u32) -> u32) -> Self {
        LabelImage {
            width: self.width,
            height: self.height,
            labels: self.labels.iter().map(|l| l.map(&f)).collect(),
        }
    }

    /// Writes a 16-bit PNG storing `label + 1`, with 0 for unlabeled pixels;
    /// read it back with zero treated as unlabeled.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut raw = Vec::with_capacity(self.labels.len());
        for l in &self.labels {
            raw.push(match l {
                None => 0,
                Some(v) if *v < u16::MAX as u32 => *v as u16 + 1,
                Some(v) => {
                    return Err(Error::InvalidParameter(format!(
                        "label {v} does not fit a 16-bit label image"
                    )))
                }
            });
        }
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("size checked");
        buf.save(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
    }
}

/// Paints each mapped pixel with its point's segment label.
pub fn project_labels(seg: &Segmentation, mapping: &GridMapping) -> Result<LabelImage> {
    if seg.len() != mapping.n_points() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation covers {} points, grid maps {}",
            seg.len(),
            mapping.n_points()
        )));
    }
    let mut labels = vec![None; mapping.width() * mapping.height()];
    for (p, &l) in seg.labels().iter().enumerate() {
        let (r, c) = mapping.pixel_of(p);
        labels[r * mapping.width() + c] = Some(l as u32);
    }
    LabelImage::new(mapping.width(), mapping.height(), labels)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMask {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BoundaryMask {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} flags for a {width}x{height} mask",
                mask.len()
            )));
        }
        Ok(BoundaryMask { width, height, mask })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// `(row, col)` of every boundary pixel, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i / self.width, i % self.width))
    }
}

/// A labeled pixel is a boundary pixel when one of its 4-neighbors carries a
/// different label. Unlabeled neighbors and the image frame do not count.
pub fn boundary_mask(img: &LabelImage) -> BoundaryMask {
    let (w, h) = (img.width, img.height);
    let mut mask = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            let Some(l) = img.get(r, c) else { continue };
            let differs = |rr: usize, cc: usize| img.get(rr, cc).is_some_and(|m| m != l);
            mask[r * w + c] = (c + 1 < w && differs(r, c + 1))
                || (c > 0 && differs(r, c - 1))
                || (r + 1 < h && differs(r + 1, c))
                || (r > 0 && differs(r - 1, c));
        }
    }
    BoundaryMask { width: w, height: h, mask }
}

/// Fraction of ground-truth boundary pixels with a predicted boundary pixel
/// within Euclidean distance `d`; 1 when the ground truth has no boundary.
pub fn boundary_recall(gt: &BoundaryMask, pred: &BoundaryMask, d: f64) -> Result<f64> {
    if gt.width != pred.width || gt.height != pred.height {
        return Err(Error::DimensionMismatch(format!(
            "ground truth {}x{} vs prediction {}x{}",
            gt.width, gt.height, pred.width, pred.height
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("boundary distance must be nonnegative, got {d}")));
    }
    let reach = d.floor() as i64;
    let disk: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|dr| (-reach..=reach).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| ((dr * dr + dc * dc) as f64) <= d * d)
        .collect();
    let (w, h) = (gt.width as i64, gt.height as i64);
    let mut tp = 0usize;
    let mut total = 0usize;
    for (r, c) in gt.pixels() {
        total += 1;
        let hit = disk.iter().any(|&(dr, dc)| {
            let (rr, cc) = (r as i64 + dr, c as i64 + dc);
            rr >= 0 && rr < h && cc >= 0 && cc < w && pred.get(rr as usize, cc as usize)
        });
        if hit {
            tp += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { tp as f64 / total as f64 })
}

/// Under-segmentation error over pixels labeled in both images, and the
/// number N of ground-truth segments that have at least one such pixel.
///
/// Each predicted segment P overlapping a ground-truth segment S contributes
/// `min(|P ∩ S|, |P \ S|)`; the sum over all (S, P) pairs is divided by N.
pub fn under_segmentation_error(gt: &LabelImage, pred: &LabelImage) -> Result<(f64, usize)> {
    if gt.width != pred.width || gt.height != pred.height {
        return Err(Error::DimensionMismatch(format!(
            "ground truth {}x{} vs prediction {}x{}",
            gt.width, gt.height, pred.width, pred.height
        )));
    }
    let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
    let mut pred_size: HashMap<u32, usize> = HashMap::new();
    for (g, p) in gt.labels.iter().zip(&pred.labels) {
        if let (Some(g), Some(p)) = (g, p) {
            *overlap.entry((*g, *p)).or_default() += 1;
            *pred_size.entry(*p).or_default() += 1;
        }
    }
    if overlap.is_empty() {
        return Err(Error::NoCommonPixels);
    }
    let n_gt = overlap.keys().map(|k| k.0).collect::<BTreeSet<_>>().len();
    let total: usize = overlap
        .iter()
        .map(|(&(_, p), &inside)| inside.min(pred_size[&p] - inside))
        .sum();
    Ok((total as f64 / n_gt as f64, n_gt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub boundary_recall: f64,
    pub under_seg_error: f64,
    pub n_gt_segments: usize,
}

/// Both metrics for a predicted label image against ground truth.
pub fn evaluate(gt: &LabelImage, pred: &LabelImage, d: f64) -> Result<Metrics> {
    let (ue, n) = under_segmentation_error(gt, pred)?;
    let br = boundary_recall(&boundary_mask(gt), &boundary_mask(pred), d)?;
    Ok(Metrics {
        boundary_recall: br,
        under_seg_error: ue,
        n_gt_segments: n,
    })
}

/// One point of a metric-versus-segment-count curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub n_segments: usize,
    pub boundary_recall: f64,
    pub under_seg_error: f64,
    pub delta: f64,
    pub graph: String,
    pub modalities: String,
    pub mode: String,
    pub target: Option<usize>,
    /// Notes such as a missed count target or the trivial one-point-per-segment case.
    pub flags: Vec<String>,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},\"{}\",{}",
            self.delta,
            self.n_segments,
            self.boundary_recall,
            self.under_seg_error,
            self.graph,
            self.modalities,
            self.mode
        )
    }
}
