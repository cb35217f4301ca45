//! Per-edge dissimilarities over color, Euclidean distance, normal angle and
//! FPFH histogram intersection.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cloud::{Fpfh, Point3, PointCloud, Rgb};
use crate::error::{Error, Result};
use crate::graph::ConnectivityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Color,
    Distance,
    Normal,
    Fpfh,
}

impl Modality {
    /// All modalities in their canonical order.
    pub const ALL: [Modality; 4] = [Modality::Color, Modality::Distance, Modality::Normal, Modality::Fpfh];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Color => "color",
            Modality::Distance => "distance",
            Modality::Normal => "normal",
            Modality::Fpfh => "fpfh",
        }
    }

    /// Whether computing this weight needs estimated normals.
    pub fn needs_normals(self) -> bool {
        matches!(self, Modality::Normal | Modality::Fpfh)
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "color" | "c" => Ok(Modality::Color),
            "distance" | "d" => Ok(Modality::Distance),
            "normal" | "n" => Ok(Modality::Normal),
            "fpfh" => Ok(Modality::Fpfh),
            other => Err(format!(
                "unknown modality {other:?} (expected color, distance, normal or fpfh)"
            )),
        }
    }
}

/// Non-empty set of modalities, always held in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModalitySet(Vec<Modality>);

/// Named modality combinations: `(name, members)`.
pub const PRESETS: [(&str, &[Modality]); 6] = [
    ("lv", &[Modality::Color]),
    ("lv_d", &[Modality::Color, Modality::Distance]),
    ("lv_n", &[Modality::Color, Modality::Normal]),
    ("dn", &[Modality::Distance, Modality::Normal]),
    ("lv_fpfh", &[Modality::Color, Modality::Fpfh]),
    ("pclv", &[Modality::Color, Modality::Distance, Modality::Normal]),
];

impl ModalitySet {
    pub fn new(items: impl IntoIterator<Item = Modality>) -> Result<Self> {
        let mut v: Vec<Modality> = Vec::new();
        for m in items {
            if v.contains(&m) {
                return Err(Error::InvalidParameter(format!("modality {m} listed twice")));
            }
            v.push(m);
        }
        if v.is_empty() {
            return Err(Error::InvalidParameter("modality set is empty".into()));
        }
        v.sort();
        Ok(ModalitySet(v))
    }

    pub fn preset(name: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| ModalitySet(m.to_vec()))
    }

    pub fn color() -> Self {
        ModalitySet(vec![Modality::Color])
    }

    pub fn pclv() -> Self {
        ModalitySet(vec![Modality::Color, Modality::Distance, Modality::Normal])
    }

    pub fn all() -> Self {
        ModalitySet(Modality::ALL.to_vec())
    }

    /// Parses a preset name or a comma-separated list such as `color,normal`.
    pub fn parse(text: &str) -> Result<Self> {
        if let Some(set) = Self::preset(text.trim()) {
            return Ok(set);
        }
        let items = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Modality>().map_err(Error::InvalidParameter))
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Modality> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Modality] {
        &self.0
    }

    pub fn contains(&self, m: Modality) -> bool {
        self.0.contains(&m)
    }

    pub fn position(&self, m: Modality) -> Option<usize> {
        self.0.iter().position(|&x| x == m)
    }

    /// Color when present, otherwise the first member.
    pub fn default_sort_modality(&self) -> Modality {
        if self.contains(Modality::Color) {
            Modality::Color
        } else {
            self.0[0]
        }
    }

    pub fn needs_normals(&self) -> bool {
        self.iter().any(Modality::needs_normals)
    }

    /// Preset name if the set matches one, otherwise the comma list.
    pub fn name(&self) -> String {
        PRESETS
            .iter()
            .find(|(_, m)| *m == self.0.as_slice())
            .map(|(n, _)| n.to_string())
            .unwrap_or_else(|| self.list())
    }

    /// Comma-separated member names.
    pub fn list(&self) -> String {
        self.0.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
    }
}

impl std::fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

pub fn color_weight(a: &Rgb, b: &Rgb) -> f64 {
    let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
    (d2 / 3.0).sqrt()
}

pub fn distance_weight(len: f64, d_min: f64, d_max: f64) -> f64 {
    if d_max > d_min {
        ((len - d_min) / (d_max - d_min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn normal_weight(a: &Point3, b: &Point3, unsigned: bool) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let w = if unsigned { 1.0 - dot.abs() } else { 1.0 - dot };
    // unit inputs can overshoot [0, 2] by rounding
    w.clamp(0.0, 2.0)
}

pub fn fpfh_weight(a: &Fpfh, b: &Fpfh) -> f64 {
    let inter: f64 = a.iter().zip(b).map(|(x, y)| x.min(*y)).sum();
    (1.0 - inter).clamp(0.0, 1.0)
}

/// Coefficients of the scalar combination `k_c·w_c + k_d·w_d + k_n·w_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCoefficients {
    pub color: f64,
    pub distance: f64,
    pub normal: f64,
}

impl Default for LinearCoefficients {
    fn default() -> Self {
        LinearCoefficients {
            color: 1.0 / 3.0,
            distance: 1.0 / 3.0,
            normal: 1.0 / 3.0,
        }
    }
}

impl LinearCoefficients {
    pub fn validate(&self) -> Result<()> {
        let k = [self.color, self.distance, self.normal];
        if k.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "linear coefficients must be nonnegative, got {k:?}"
            )));
        }
        if k.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidParameter("linear coefficients are all zero".into()));
        }
        Ok(())
    }

    pub fn get(&self, m: Modality) -> f64 {
        match m {
            Modality::Color => self.color,
            Modality::Distance => self.distance,
            Modality::Normal => self.normal,
            Modality::Fpfh => 0.0,
        }
    }
}

pub fn combine_linear(w_c: f64, w_d: f64, w_n: f64, k: &LinearCoefficients) -> Result<f64> {
    k.validate()?;
    Ok(k.color * w_c + k.distance * w_d + k.normal * w_n)
}

/// Connectivity graph with a weight tuple per edge, aligned with `modalities`.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    graph: ConnectivityGraph,
    modalities: ModalitySet,
    // edge-major: weights[e * m + slot]
    weights: Vec<f64>,
    lengths: Vec<f64>,
    d_min: f64,
    d_max: f64,
}

impl WeightedGraph {
    /// Assembles a weighted graph from precomputed tuples (`weights` is
    /// edge-major, one entry per modality). Edge lengths default to 0.
    pub fn from_parts(
        graph: ConnectivityGraph,
        modalities: ModalitySet,
        weights: Vec<f64>,
        lengths: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = modalities.len();
        if weights.len() != graph.n_edges() * m {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} edges x {m} modalities",
                weights.len(),
                graph.n_edges()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite edge weight {w}")));
        }
        let lengths = lengths.unwrap_or_else(|| vec![0.0; graph.n_edges()]);
        if lengths.len() != graph.n_edges() {
            return Err(Error::DimensionMismatch("edge length count".into()));
        }
        let (d_min, d_max) = extrema(&lengths);
        Ok(WeightedGraph {
            graph,
            modalities,
            weights,
            lengths,
            d_min,
            d_max,
        })
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    pub fn modalities(&self) -> &ModalitySet {
        &self.modalities
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        self.graph.edges()
    }

    pub fn tuple(&self, edge: usize) -> &[f64] {
        let m = self.modalities.len();
        &self.weights[edge * m..(edge + 1) * m]
    }

    pub fn weight(&self, edge: usize, modality: Modality) -> Option<f64> {
        self.modalities
            .position(modality)
            .map(|slot| self.weights[edge * self.modalities.len() + slot])
    }

    /// All edge weights of one modality, in edge order.
    pub fn column(&self, modality: Modality) -> Result<Vec<f64>> {
        let slot = self
            .modalities
            .position(modality)
            .ok_or(Error::MissingModality(modality))?;
        let m = self.modalities.len();
        Ok(self.weights.iter().skip(slot).step_by(m).copied().collect())
    }

    /// Raw Euclidean edge lengths in meters.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Writes `i,j,len,w_c,w_d,w_n,w_fpfh`, leaving absent modalities blank.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut body = String::from("i,j,len,w_c,w_d,w_n,w_fpfh\n");
        for (e, &(i, j)) in self.edges().iter().enumerate() {
            body.push_str(&format!("{i},{j},{}", self.lengths[e]));
            for m in Modality::ALL {
                body.push(',');
                if let Some(w) = self.weight(e, m) {
                    body.push_str(&w.to_string());
                }
            }
            body.push('\n');
        }
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn extrema(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn edge_length(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Fills the weight tuple of every edge. The first pass measures edge lengths
/// and their graph-wide extrema; the second computes the tuples.
pub fn assign_weights(
    graph: ConnectivityGraph,
    cloud: &PointCloud,
    modalities: &ModalitySet,
    unsigned_normals: bool,
) -> Result<WeightedGraph> {
    if graph.n_vertices() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} vertices, cloud has {} points",
            graph.n_vertices(),
            cloud.len()
        )));
    }
    let normals = if modalities.contains(Modality::Normal) {
        Some(cloud.normals().ok_or(Error::MissingDescriptor(Modality::Normal))?)
    } else {
        None
    };
    let fpfh = if modalities.contains(Modality::Fpfh) {
        Some(cloud.fpfh().ok_or(Error::MissingDescriptor(Modality::Fpfh))?)
    } else {
        None
    };
    let pos = cloud.positions();
    let col = cloud.colors();
    let edges = graph.edges();

    let lengths: Vec<f64> = edges
        .par_iter()
        .map(|&(i, j)| edge_length(&pos[i], &pos[j]))
        .collect();
    let (d_min, d_max) = extrema(&lengths);

    let m = modalities.len();
    let mut weights = vec![0.0; edges.len() * m];
    weights
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(e, tuple)| {
            let (i, j) = edges[e];
            for (slot, modality) in modalities.iter().enumerate() {
                tuple[slot] = match modality {
                    Modality::Color => color_weight(&col[i], &col[j]),
                    Modality::Distance => distance_weight(lengths[e], d_min, d_max),
                    Modality::Normal => {
                        let n = normals.expect("checked above");
                        normal_weight(&n[i], &n[j], unsigned_normals)
                    }
                    Modality::Fpfh => {
                        let h = fpfh.expect("checked above");
                        fpfh_weight(&h[i], &h[j])
                    }
                };
            }
        });
    Ok(WeightedGraph {
        graph,
        modalities: modalities.clone(),
        weights,
        lengths,
        d_min,
        d_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::FPFH_BINS;
    use crate::graph::{build_knn, GraphKind};

    #[test]
    fn color_weight_values() {
        assert_eq!(color_weight(&[0.2, 0.3, 0.4], &[0.2, 0.3, 0.4]), 0.0);
        assert!((color_weight(&[0.0; 3], &[1.0; 3]) - 1.0).abs() < 1e-15);
        let w = color_weight(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!((w - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((w - 0.81650).abs() < 1e-5);
    }

    #[test]
    fn distance_weight_values() {
        assert_eq!(distance_weight(0.5, 0.5, 2.0), 0.0);
        assert_eq!(distance_weight(2.0, 0.5, 2.0), 1.0);
        assert_eq!(distance_weight(1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn normal_weight_values() {
        let z = [0.0, 0.0, 1.0];
        assert_eq!(normal_weight(&z, &z, false), 0.0);
        assert_eq!(normal_weight(&z, &[1.0, 0.0, 0.0], false), 1.0);
        assert_eq!(normal_weight(&z, &[0.0, 0.0, -1.0], false), 2.0);
        assert_eq!(normal_weight(&z, &[0.0, 0.0, -1.0], true), 0.0);
    }

    #[test]
    fn fpfh_weight_values() {
        let uniform = [1.0 / 33.0; FPFH_BINS];
        let mut spike = [0.0; FPFH_BINS];
        spike[4] = 1.0;
        let mut other = [0.0; FPFH_BINS];
        other[5] = 1.0;
        assert!(fpfh_weight(&uniform, &uniform).abs() < 1e-12);
        assert_eq!(fpfh_weight(&spike, &other), 1.0);
        assert!((fpfh_weight(&uniform, &spike) - 32.0 / 33.0).abs() < 1e-12);
        assert!((fpfh_weight(&uniform, &spike) - 0.96970).abs() < 1e-5);
    }

    #[test]
    fn linear_combination() {
        let proj = LinearCoefficients {
            color: 1.0,
            distance: 0.0,
            normal: 0.0,
        };
        assert_eq!(combine_linear(0.7, 0.2, 0.9, &proj).unwrap(), 0.7);
        assert_eq!(combine_linear(0.0, 0.0, 0.0, &LinearCoefficients::default()).unwrap(), 0.0);
        let w = combine_linear(0.3, 0.5, 1.0, &LinearCoefficients::default()).unwrap();
        assert!((w - 0.6).abs() < 1e-12);
        let zero = LinearCoefficients {
            color: 0.0,
            distance: 0.0,
            normal: 0.0,
        };
        assert!(combine_linear(0.1, 0.1, 0.1, &zero).is_err());
    }

    #[test]
    fn modality_sets() {
        let set = ModalitySet::parse("normal,color").unwrap();
        assert_eq!(set.as_slice(), &[Modality::Color, Modality::Normal]);
        assert_eq!(set.name(), "lv_n");
        assert_eq!(ModalitySet::parse("dn").unwrap().default_sort_modality(), Modality::Distance);
        assert_eq!(ModalitySet::pclv().default_sort_modality(), Modality::Color);
        assert!(ModalitySet::parse("color,color").is_err());
        assert!(ModalitySet::parse("").is_err());
        assert!(ModalitySet::parse("hue").is_err());
        for (name, _) in PRESETS {
            assert_eq!(ModalitySet::preset(name).unwrap().name(), name);
        }
    }

    #[test]
    fn single_edge_has_zero_distance_weight() {
        let cloud = PointCloud::from_positions(vec![[0.0; 3], [1.0, 2.0, 3.0]]).unwrap();
        let g = ConnectivityGraph::from_edges(2, [(0, 1)], GraphKind::Knn).unwrap();
        let wg = assign_weights(g, &cloud, &ModalitySet::new([Modality::Distance]).unwrap(), true).unwrap();
        assert_eq!(wg.tuple(0), &[0.0]);
        assert_eq!(wg.d_min(), wg.d_max());
    }

    #[test]
    fn color_only_tuples_are_color_weights() {
        let cloud = PointCloud::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0.1, 0.2, 0.3], [0.9, 0.2, 0.3], [0.9, 0.8, 0.0]],
        )
        .unwrap();
        let g = build_knn(&cloud, 1).unwrap();
        let wg = assign_weights(g, &cloud, &ModalitySet::color(), false).unwrap();
        for (e, &(i, j)) in wg.edges().iter().enumerate() {
            assert_eq!(wg.tuple(e), &[color_weight(&cloud.colors()[i], &cloud.colors()[j])]);
        }
    }

    #[test]
    fn missing_descriptors_are_reported() {
        let cloud = PointCloud::from_positions(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let g = ConnectivityGraph::from_edges(2, [(0, 1)], GraphKind::Knn).unwrap();
        let err = assign_weights(g, &cloud, &ModalitySet::pclv(), true).unwrap_err();
        assert!(matches!(err, Error::MissingDescriptor(Modality::Normal)));
    }

    #[test]
    fn csv_leaves_absent_modalities_blank() {
        let cloud = PointCloud::from_positions(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let g = ConnectivityGraph::from_edges(2, [(0, 1)], GraphKind::Knn).unwrap();
        let wg = assign_weights(g, &cloud, &ModalitySet::color(), true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        wg.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "i,j,len,w_c,w_d,w_n,w_fpfh\n0,1,1,0,,,\n");
    }
}
