//! Local-variation merging over a weighted graph, with one criterion per
//! modality or a single criterion on a linear combination of weights.

mod postprocess;
mod target;

pub use postprocess::{merge_small_segments, merge_small_segments_by, small_segment_threshold};
pub use target::{search_delta, DeltaSearch, DELTA_SEARCH_ITERATIONS, DELTA_SEARCH_TOLERANCE};

use crate::disjoint::DisjointSets;
use crate::error::{Error, Result};
use crate::graph::GraphKind;
use crate::weights::{LinearCoefficients, Modality, ModalitySet, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MergeMode {
    /// Merge only when every modality's criterion passes.
    MultiCriteria,
    /// One criterion on `k_c·w_c + k_d·w_d + k_n·w_n`.
    LinearScalar(LinearCoefficients),
}

impl MergeMode {
    pub fn name(&self) -> &'static str {
        match self {
            MergeMode::MultiCriteria => "multi",
            MergeMode::LinearScalar(_) => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    pub delta: f64,
    pub mode: MergeMode,
    pub modalities: ModalitySet,
    /// Defaults to color when present, else the first modality of the set.
    pub sort_modality: Option<Modality>,
}

impl MergeConfig {
    pub fn new(delta: f64, modalities: ModalitySet) -> Self {
        MergeConfig {
            delta,
            mode: MergeMode::MultiCriteria,
            modalities,
            sort_modality: None,
        }
    }

    pub fn linear(delta: f64, modalities: ModalitySet, coefficients: LinearCoefficients) -> Self {
        MergeConfig {
            mode: MergeMode::LinearScalar(coefficients),
            ..Self::new(delta, modalities)
        }
    }

    pub fn sort_modality(&self) -> Modality {
        self.sort_modality
            .unwrap_or_else(|| self.modalities.default_sort_modality())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be finite and nonnegative, got {}",
                self.delta
            )));
        }
        if !self.modalities.contains(self.sort_modality()) {
            return Err(Error::InvalidParameter(format!(
                "sort modality {} is not in the modality set {}",
                self.sort_modality(),
                self.modalities.list()
            )));
        }
        if let MergeMode::LinearScalar(k) = &self.mode {
            k.validate()?;
            if self.modalities.contains(Modality::Fpfh) {
                return Err(Error::InvalidParameter(
                    "linear mode combines color, distance and normal only".into(),
                ));
            }
            if self.modalities.iter().all(|m| k.get(m) == 0.0) {
                return Err(Error::InvalidParameter(
                    "linear coefficients are zero for every selected modality".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Union-find state of a merge run with per-component internal variation.
#[derive(Debug, Clone)]
pub struct MergeState {
    sets: DisjointSets,
    // vertex-major: internal[v * n_criteria + c], meaningful at roots
    internal: Vec<f64>,
    n_criteria: usize,
    merge_edges: Vec<usize>,
}

impl MergeState {
    pub fn new(n: usize, n_criteria: usize) -> Self {
        MergeState {
            sets: DisjointSets::new(n),
            internal: vec![0.0; n * n_criteria],
            n_criteria,
            merge_edges: Vec::new(),
        }
    }

    pub fn find(&mut self, v: usize) -> usize {
        self.sets.find(v)
    }

    pub fn size(&self, root: usize) -> usize {
        self.sets.size(root)
    }

    pub fn n_components(&self) -> usize {
        self.sets.count()
    }

    pub fn n_criteria(&self) -> usize {
        self.n_criteria
    }

    /// Largest criterion-`c` weight among the edges that built the component.
    pub fn internal(&self, root: usize, c: usize) -> f64 {
        self.internal[root * self.n_criteria + c]
    }

    /// Edges that performed merges, in merge order.
    pub fn merge_edges(&self) -> &[usize] {
        &self.merge_edges
    }

    pub fn labels(&mut self) -> Vec<usize> {
        self.sets.labels()
    }

    fn accepts(&self, a: usize, b: usize, weights: &[f64], delta: f64) -> bool {
        let ta = delta / self.sets.size(a) as f64;
        let tb = delta / self.sets.size(b) as f64;
        let m = self.n_criteria;
        (0..m).all(|c| {
            let limit = (self.internal[a * m + c] + ta).min(self.internal[b * m + c] + tb);
            weights[c] <= limit
        })
    }

    fn merge(&mut self, a: usize, b: usize, weights: &[f64], edge: usize) {
        let m = self.n_criteria;
        let r = self.sets.union_roots(a, b);
        for (c, &w) in weights.iter().enumerate() {
            let v = self.internal[a * m + c].max(self.internal[b * m + c]).max(w);
            self.internal[r * m + c] = v;
        }
        self.merge_edges.push(edge);
    }
}

/// Merge engine with the criterion weights and edge order precomputed, so
/// repeated runs at different δ (as in a δ search) skip the sort.
#[derive(Debug, Clone)]
pub struct MergeEngine<'a> {
    wg: &'a WeightedGraph,
    config: MergeConfig,
    // edge-major criterion weights
    criteria: Vec<f64>,
    n_criteria: usize,
    sort_weights: Vec<f64>,
    order: Vec<u32>,
}

impl<'a> MergeEngine<'a> {
    /// `config.delta` is kept as the default for [`MergeEngine::segment`].
    pub fn new(wg: &'a WeightedGraph, config: &MergeConfig) -> Result<Self> {
        config.validate()?;
        for m in config.modalities.iter() {
            if !wg.modalities().contains(m) {
                return Err(Error::MissingModality(m));
            }
        }
        let n_edges = wg.n_edges();
        let (criteria, n_criteria, sort_weights) = match &config.mode {
            MergeMode::MultiCriteria => {
                let cols = config
                    .modalities
                    .iter()
                    .map(|m| wg.column(m))
                    .collect::<Result<Vec<_>>>()?;
                let mut flat = Vec::with_capacity(n_edges * cols.len());
                for e in 0..n_edges {
                    flat.extend(cols.iter().map(|c| c[e]));
                }
                let sort = wg.column(config.sort_modality())?;
                (flat, cols.len(), sort)
            }
            MergeMode::LinearScalar(k) => {
                let mut combined = vec![0.0; n_edges];
                for m in config.modalities.iter() {
                    let coef = k.get(m);
                    if coef == 0.0 {
                        continue;
                    }
                    for (acc, w) in combined.iter_mut().zip(wg.column(m)?) {
                        *acc += coef * w;
                    }
                }
                (combined.clone(), 1, combined)
            }
        };
        if n_edges > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many edges".into()));
        }
        let mut order: Vec<u32> = (0..n_edges as u32).collect();
        order.sort_unstable_by(|&a, &b| {
            sort_weights[a as usize]
                .total_cmp(&sort_weights[b as usize])
                .then(a.cmp(&b))
        });
        Ok(MergeEngine {
            wg,
            config: config.clone(),
            criteria,
            n_criteria,
            sort_weights,
            order,
        })
    }

    pub fn config(&self) -> &MergeConfig {
        &self.config
    }

    pub fn graph(&self) -> &'a WeightedGraph {
        self.wg
    }

    /// Weight each edge is sorted by (the combined weight in linear mode).
    pub fn sort_weights(&self) -> &[f64] {
        &self.sort_weights
    }

    /// Edge indices in processing order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn n_criteria(&self) -> usize {
        self.n_criteria
    }

    /// Criterion weights of one edge.
    pub fn criteria(&self, edge: usize) -> &[f64] {
        &self.criteria[edge * self.n_criteria..(edge + 1) * self.n_criteria]
    }

    pub fn run(&self, delta: f64) -> MergeState {
        let edges = self.wg.edges();
        let mut state = MergeState::new(self.wg.n_vertices(), self.n_criteria);
        for &e in &self.order {
            let e = e as usize;
            let (i, j) = edges[e];
            let a = state.find(i);
            let b = state.find(j);
            if a == b {
                continue;
            }
            let w = self.criteria(e);
            if state.accepts(a, b, w, delta) {
                state.merge(a, b, w, e);
            }
        }
        state
    }

    pub fn segment_with_delta(&self, delta: f64) -> Segmentation {
        let mut state = self.run(delta);
        let mut config = self.config.clone();
        config.delta = delta;
        Segmentation::from_labels(state.labels()).with_provenance(Provenance {
            merge: config,
            graph: self.wg.graph().kind(),
        })
    }

    pub fn segment(&self) -> Segmentation {
        self.segment_with_delta(self.config.delta)
    }
}

pub fn segment(wg: &WeightedGraph, config: &MergeConfig) -> Result<Segmentation> {
    Ok(MergeEngine::new(wg, config)?.segment())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub merge: MergeConfig,
    pub graph: GraphKind,
}

/// Per-point segment labels, dense in `[0, n_segments)` and numbered by
/// first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    labels: Vec<usize>,
    sizes: Vec<usize>,
    provenance: Option<Provenance>,
}

impl Segmentation {
    /// Relabels arbitrary ids densely by first occurrence.
    pub fn from_labels(raw: Vec<usize>) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut sizes = Vec::new();
        let labels = raw
            .into_iter()
            .map(|l| {
                let next = map.len();
                let dense = *map.entry(l).or_insert(next);
                if dense == sizes.len() {
                    sizes.push(0);
                }
                sizes[dense] += 1;
                dense
            })
            .collect();
        Segmentation {
            labels,
            sizes,
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, point: usize) -> usize {
        self.labels[point]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_segments(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Whether every segment induces a connected subgraph of `edges`.
    pub fn is_connected_in(&self, edges: &[(usize, usize)]) -> bool {
        let mut sets = DisjointSets::new(self.len());
        for &(i, j) in edges {
            if self.labels[i] == self.labels[j] {
                sets.union(i, j);
            }
        }
        sets.count() == self.n_segments()
    }

    /// Writes one `index label` line per point.
    pub fn write_labels(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut body = String::with_capacity(self.labels.len() * 12);
        for (i, l) in self.labels.iter().enumerate() {
            body.push_str(&format!("{i} {l}\n"));
        }
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads the `index label` format written by [`Segmentation::write_labels`].
    pub fn read_labels(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut labels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parsed = (|| {
                let i: usize = parts.next()?.parse().ok()?;
                let l: usize = parts.next()?.parse().ok()?;
                parts.next().is_none().then_some((i, l))
            })();
            match parsed {
                Some((i, l)) if i == labels.len() => labels.push(l),
                Some((i, _)) => {
                    return Err(Error::format(
                        path,
                        format!("line {}: expected index {}, found {i}", lineno + 1, labels.len()),
                    ))
                }
                None => {
                    return Err(Error::format(
                        path,
                        format!("line {}: expected \"index label\"", lineno + 1),
                    ))
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::format(path, "no labels"));
        }
        Ok(Segmentation::from_labels(labels))
    }
}
