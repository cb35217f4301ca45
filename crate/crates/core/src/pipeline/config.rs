//! Run configuration as flat `key=value` pairs.
//!
//! Keys: `input_ply`, `input_depth`, `input_rgb`, `intrinsics` (a 5-value
//! file or `nyu`), `graph`, `k`, `radius`, `preset`, `modalities`, `mode`
//! (`multi` or `linear`), `k_c`, `k_d`, `k_n`, `delta`, `target_segments`,
//! `postprocess`, `postprocess_segments`, `normal_k`, `fpfh_k`,
//! `estimate_normals`, `unsigned_normals` (`auto`, `true`, `false`),
//! `descriptor_cache`, `gt`, `gt_ignore_zero`, `d`, `out_labels`, `out_ply`,
//! `out_meta`, `out_label_image`, `out_csv`.
//!
//! Presets fill in only the keys that are not set explicitly; flags override
//! the config file, which overrides the defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cloud::CameraIntrinsics;
use crate::descriptors::{DEFAULT_FPFH_K, DEFAULT_NORMAL_K};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_BOUNDARY_DISTANCE;
use crate::graph::GraphKind;
use crate::merge::{MergeConfig, MergeMode};
use crate::weights::{LinearCoefficients, Modality, ModalitySet, PRESETS};

pub const DEFAULT_DELTA: f64 = 1.0;
pub const DEFAULT_PRESET: &str = "pclv";

const KEYS: [&str; 30] = [
    "input_ply",
    "input_depth",
    "input_rgb",
    "intrinsics",
    "graph",
    "k",
    "radius",
    "preset",
    "modalities",
    "mode",
    "k_c",
    "k_d",
    "k_n",
    "delta",
    "target_segments",
    "postprocess",
    "postprocess_segments",
    "normal_k",
    "fpfh_k",
    "estimate_normals",
    "unsigned_normals",
    "descriptor_cache",
    "gt",
    "gt_ignore_zero",
    "d",
    "out_labels",
    "out_ply",
    "out_meta",
    "out_label_image",
    "out_csv",
];

#[derive(Debug, Clone, PartialEq)]
pub enum IntrinsicsSource {
    Nyu,
    File(PathBuf),
}

impl IntrinsicsSource {
    pub fn load(&self) -> Result<CameraIntrinsics> {
        match self {
            IntrinsicsSource::Nyu => Ok(CameraIntrinsics::nyu()),
            IntrinsicsSource::File(p) => CameraIntrinsics::load(p),
        }
    }

    fn text(&self) -> String {
        match self {
            IntrinsicsSource::Nyu => "nyu".into(),
            IntrinsicsSource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalSign {
    /// Unsigned when the cloud has no viewpoint to orient normals toward.
    Auto,
    Signed,
    Unsigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Multi,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_ply: Option<PathBuf>,
    pub input_depth: Option<PathBuf>,
    pub input_rgb: Option<PathBuf>,
    pub intrinsics: Option<IntrinsicsSource>,
    pub graph: GraphKind,
    pub k: Option<usize>,
    pub radius: Option<f64>,
    pub preset: String,
    pub modalities: ModalitySet,
    pub mode: ModeChoice,
    pub coefficients: LinearCoefficients,
    pub delta: Option<f64>,
    pub target_segments: Option<usize>,
    pub postprocess: bool,
    /// Desired count for the small-segment rule; defaults to the target, or
    /// to the raw merge count in δ mode.
    pub postprocess_segments: Option<usize>,
    pub normal_k: usize,
    pub fpfh_k: usize,
    pub estimate_normals: bool,
    pub unsigned_normals: NormalSign,
    pub descriptor_cache: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub gt_ignore_zero: bool,
    pub boundary_distance: f64,
    pub out_labels: Option<PathBuf>,
    pub out_ply: Option<PathBuf>,
    pub out_meta: Option<PathBuf>,
    pub out_label_image: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_ply: None,
            input_depth: None,
            input_rgb: None,
            intrinsics: None,
            graph: GraphKind::Grid8,
            k: None,
            radius: None,
            preset: DEFAULT_PRESET.into(),
            modalities: ModalitySet::pclv(),
            mode: ModeChoice::Multi,
            coefficients: LinearCoefficients::default(),
            delta: Some(DEFAULT_DELTA),
            target_segments: None,
            postprocess: true,
            postprocess_segments: None,
            normal_k: DEFAULT_NORMAL_K,
            fpfh_k: DEFAULT_FPFH_K,
            estimate_normals: true,
            unsigned_normals: NormalSign::Auto,
            descriptor_cache: None,
            gt: None,
            gt_ignore_zero: false,
            boundary_distance: DEFAULT_BOUNDARY_DISTANCE,
            out_labels: None,
            out_ply: None,
            out_meta: None,
            out_label_image: None,
            out_csv: None,
        }
    }
}

/// Keys a preset sets, as `(key, value)`.
pub fn preset_pairs(name: &str) -> Option<Vec<(&'static str, &'static str)>> {
    match name {
        "outdoor" => Some(vec![
            ("graph", "knn"),
            ("k", "8"),
            ("modalities", "pclv"),
            ("unsigned_normals", "true"),
        ]),
        _ => PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, _)| vec![("modalities", *n)]),
    }
}

/// Names accepted by the `preset` key.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).chain(["outdoor"]).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?} as a number")))
}

fn optional<T>(v: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {raw:?}", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Builds a config from `file` pairs overridden by `flags` pairs.
    pub fn resolve(file: &[(String, String)], flags: &[(String, String)]) -> Result<Self> {
        let mut merged: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in file.iter().chain(flags) {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
            merged.insert(k.clone(), v.clone());
        }
        // δ and a target are alternatives: a flag for one drops the file's other
        let flagged = |key: &str| flags.iter().any(|(k, _)| k == key);
        for (given, other) in [("delta", "target_segments"), ("target_segments", "delta")] {
            if flagged(given) && !flagged(other) {
                merged.remove(other);
            }
        }
        let mut cfg = RunConfig::default();
        let preset = merged
            .get("preset")
            .cloned()
            .unwrap_or_else(|| DEFAULT_PRESET.to_string());
        let pairs = preset_pairs(&preset).ok_or_else(|| {
            Error::Config(format!(
                "preset: unknown preset {preset:?} (expected one of {})",
                preset_names().join(", ")
            ))
        })?;
        cfg.preset = preset;
        for (k, v) in pairs {
            if !merged.contains_key(k) {
                cfg.set(k, v)?;
            }
        }
        for (k, v) in &merged {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        // a target replaces the default δ unless δ was given explicitly
        if cfg.target_segments.is_some() && !merged.contains_key("delta") {
            cfg.delta = None;
        }
        Ok(cfg)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        Self::resolve(pairs, &[])
    }

    pub fn load(path: &Path, flags: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::resolve(&parse_pairs(&text)?, flags)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let path = |v: &str| optional(v, |s| Ok(PathBuf::from(s)));
        match key {
            "input_ply" => self.input_ply = path(v)?,
            "input_depth" => self.input_depth = path(v)?,
            "input_rgb" => self.input_rgb = path(v)?,
            "intrinsics" => {
                self.intrinsics = optional(v, |s| {
                    Ok(if s == "nyu" {
                        IntrinsicsSource::Nyu
                    } else {
                        IntrinsicsSource::File(s.into())
                    })
                })?
            }
            "graph" => self.graph = v.parse().map_err(|e| Error::Config(format!("graph: {e}")))?,
            "k" => self.k = optional(v, |s| parse_num(key, s))?,
            "radius" => self.radius = optional(v, |s| parse_num(key, s))?,
            "preset" => self.preset = v.to_string(),
            "modalities" => {
                self.modalities = ModalitySet::parse(v).map_err(|e| Error::Config(format!("modalities: {e}")))?
            }
            "mode" => {
                self.mode = match v {
                    "multi" => ModeChoice::Multi,
                    "linear" => ModeChoice::Linear,
                    _ => return Err(Error::Config(format!("mode: expected multi or linear, got {v:?}"))),
                }
            }
            "k_c" => self.coefficients.color = parse_num(key, v)?,
            "k_d" => self.coefficients.distance = parse_num(key, v)?,
            "k_n" => self.coefficients.normal = parse_num(key, v)?,
            "delta" => self.delta = optional(v, |s| parse_num(key, s))?,
            "target_segments" => self.target_segments = optional(v, |s| parse_num(key, s))?,
            "postprocess" => self.postprocess = parse_bool(key, v)?,
            "postprocess_segments" => self.postprocess_segments = optional(v, |s| parse_num(key, s))?,
            "normal_k" => self.normal_k = parse_num(key, v)?,
            "fpfh_k" => self.fpfh_k = parse_num(key, v)?,
            "estimate_normals" => self.estimate_normals = parse_bool(key, v)?,
            "unsigned_normals" => {
                self.unsigned_normals = match v {
                    "auto" => NormalSign::Auto,
                    other => {
                        if parse_bool(key, other)? {
                            NormalSign::Unsigned
                        } else {
                            NormalSign::Signed
                        }
                    }
                }
            }
            "descriptor_cache" => self.descriptor_cache = path(v)?,
            "gt" => self.gt = path(v)?,
            "gt_ignore_zero" => self.gt_ignore_zero = parse_bool(key, v)?,
            "d" => self.boundary_distance = parse_num(key, v)?,
            "out_labels" => self.out_labels = path(v)?,
            "out_ply" => self.out_ply = path(v)?,
            "out_meta" => self.out_meta = path(v)?,
            "out_label_image" => self.out_label_image = path(v)?,
            "out_csv" => self.out_csv = path(v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value; feeding these back through
    /// [`RunConfig::from_pairs`] reproduces the config.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let o = |v: Option<String>| v.unwrap_or_default();
        let b = |v: bool| v.to_string();
        let pairs: Vec<(&str, String)> = vec![
            ("input_ply", p(&self.input_ply)),
            ("input_depth", p(&self.input_depth)),
            ("input_rgb", p(&self.input_rgb)),
            ("intrinsics", o(self.intrinsics.as_ref().map(IntrinsicsSource::text))),
            ("graph", self.graph.name().into()),
            ("k", o(self.k.map(|x| x.to_string()))),
            ("radius", o(self.radius.map(|x| x.to_string()))),
            ("preset", self.preset.clone()),
            ("modalities", self.modalities.list()),
            (
                "mode",
                match self.mode {
                    ModeChoice::Multi => "multi".into(),
                    ModeChoice::Linear => "linear".into(),
                },
            ),
            ("k_c", self.coefficients.color.to_string()),
            ("k_d", self.coefficients.distance.to_string()),
            ("k_n", self.coefficients.normal.to_string()),
            ("delta", o(self.delta.map(|x| x.to_string()))),
            ("target_segments", o(self.target_segments.map(|x| x.to_string()))),
            ("postprocess", b(self.postprocess)),
            ("postprocess_segments", o(self.postprocess_segments.map(|x| x.to_string()))),
            ("normal_k", self.normal_k.to_string()),
            ("fpfh_k", self.fpfh_k.to_string()),
            ("estimate_normals", b(self.estimate_normals)),
            (
                "unsigned_normals",
                match self.unsigned_normals {
                    NormalSign::Auto => "auto".into(),
                    NormalSign::Signed => "false".into(),
                    NormalSign::Unsigned => "true".into(),
                },
            ),
            ("descriptor_cache", p(&self.descriptor_cache)),
            ("gt", p(&self.gt)),
            ("gt_ignore_zero", b(self.gt_ignore_zero)),
            ("d", self.boundary_distance.to_string()),
            ("out_labels", p(&self.out_labels)),
            ("out_ply", p(&self.out_ply)),
            ("out_meta", p(&self.out_meta)),
            ("out_label_image", p(&self.out_label_image)),
            ("out_csv", p(&self.out_csv)),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn merge_mode(&self) -> MergeMode {
        match self.mode {
            ModeChoice::Multi => MergeMode::MultiCriteria,
            ModeChoice::Linear => MergeMode::LinearScalar(self.coefficients),
        }
    }

    /// Merge configuration; δ is 0 in target mode until the search sets it.
    pub fn merge_config(&self) -> MergeConfig {
        MergeConfig {
            delta: self.delta.unwrap_or(0.0),
            mode: self.merge_mode(),
            modalities: self.modalities.clone(),
            sort_modality: None,
        }
    }

    pub fn is_rgbd(&self) -> bool {
        self.input_depth.is_some() || self.input_rgb.is_some()
    }

    /// Problems that would stop [`crate::pipeline::run`], each naming the
    /// offending key. Empty when the config is runnable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |field: &'static str, message: String| out.push(Diagnostic { field, message });
        match (&self.input_ply, self.is_rgbd()) {
            (None, false) => diag("input_ply", "no input: give a PLY file or depth + rgb images".into()),
            (Some(_), true) => diag("input_ply", "give either a PLY file or depth + rgb images, not both".into()),
            (None, true) => {
                if self.input_depth.is_none() {
                    diag("input_depth", "RGB-D input needs a depth image".into());
                }
                if self.input_rgb.is_none() {
                    diag("input_rgb", "RGB-D input needs a color image".into());
                }
                if self.intrinsics.is_none() {
                    diag("intrinsics", "RGB-D input needs camera intrinsics (a file or \"nyu\")".into());
                }
            }
            (Some(_), false) => {}
        }
        match self.graph {
            GraphKind::Knn => match self.k {
                None => diag("k", "the knn graph needs K".into()),
                Some(0) => diag("k", "K must be at least 1".into()),
                _ => {}
            },
            GraphKind::Radius => match self.radius {
                None => diag("radius", "the radius graph needs a radius".into()),
                Some(r) if !(r > 0.0 && r.is_finite()) => diag("radius", format!("radius must be positive, got {r}")),
                _ => {}
            },
            // a PLY only supports grid8 when it carries a grid; checked when loaded
            GraphKind::Grid8 | GraphKind::Delaunay => {}
        }
        if let Some(0) = self.k {
            if self.graph != GraphKind::Knn {
                diag("k", "K must be at least 1".into());
            }
        }
        match (self.delta, self.target_segments) {
            (Some(_), Some(_)) => diag("delta", "give either delta or target_segments, not both".into()),
            (None, None) => diag("delta", "give delta or target_segments".into()),
            (Some(d), None) if !(d >= 0.0 && d.is_finite()) => diag("delta", format!("delta must be nonnegative, got {d}")),
            (None, Some(0)) => diag("target_segments", "target must be at least 1".into()),
            _ => {}
        }
        if self.postprocess_segments == Some(0) {
            diag("postprocess_segments", "must be at least 1".into());
        }
        if self.mode == ModeChoice::Linear {
            for (field, v) in [
                ("k_c", self.coefficients.color),
                ("k_d", self.coefficients.distance),
                ("k_n", self.coefficients.normal),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    diag(field, format!("coefficient must be nonnegative, got {v}"));
                }
            }
            if self.modalities.contains(Modality::Fpfh) {
                diag("mode", "linear mode combines color, distance and normal only".into());
            } else if self.modalities.iter().all(|m| self.coefficients.get(m) == 0.0) {
                diag("k_c", "linear coefficients are zero for every selected modality".into());
            }
        }
        if self.modalities.needs_normals() {
            if !self.estimate_normals && self.input_ply.is_none() {
                diag(
                    "estimate_normals",
                    format!(
                        "modalities {} need normals: enable estimate_normals or supply a PLY with nx,ny,nz",
                        self.modalities.list()
                    ),
                );
            }
            if self.estimate_normals && self.normal_k < 3 {
                diag("normal_k", format!("normal_k must be at least 3, got {}", self.normal_k));
            }
        }
        if self.modalities.contains(Modality::Fpfh) && self.fpfh_k < 3 {
            diag("fpfh_k", format!("fpfh_k must be at least 3, got {}", self.fpfh_k));
        }
        if !(self.boundary_distance >= 0.0) {
            diag("d", format!("boundary distance must be nonnegative, got {}", self.boundary_distance));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn rgbd() -> Vec<(String, String)> {
        pairs(&[("input_depth", "d.png"), ("input_rgb", "c.png"), ("intrinsics", "nyu")])
    }

    #[test]
    fn default_rgbd_config_is_valid_pclv() {
        let cfg = RunConfig::from_pairs(&rgbd()).unwrap();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert_eq!(cfg.graph, GraphKind::Grid8);
        assert_eq!(cfg.modalities, ModalitySet::pclv());
        assert_eq!(cfg.merge_mode(), MergeMode::MultiCriteria);
    }

    #[test]
    fn outdoor_preset() {
        let cfg = RunConfig::resolve(&pairs(&[("input_ply", "x.ply"), ("preset", "outdoor")]), &[]).unwrap();
        assert_eq!(cfg.graph, GraphKind::Knn);
        assert_eq!(cfg.k, Some(8));
        assert_eq!(cfg.unsigned_normals, NormalSign::Unsigned);
        assert_eq!(cfg.modalities, ModalitySet::pclv());
        assert!(cfg.validate().is_empty());
    }

    #[test]
    fn flags_beat_file_beat_presets() {
        let file = pairs(&[("input_ply", "x.ply"), ("preset", "outdoor"), ("k", "12"), ("delta", "2")]);
        let flags = pairs(&[("delta", "5"), ("graph", "radius"), ("radius", "0.1")]);
        let cfg = RunConfig::resolve(&file, &flags).unwrap();
        assert_eq!(cfg.k, Some(12));
        assert_eq!(cfg.delta, Some(5.0));
        assert_eq!(cfg.graph, GraphKind::Radius);
        let cfg = RunConfig::resolve(&file, &pairs(&[("preset", "lv")])).unwrap();
        assert_eq!(cfg.modalities, ModalitySet::color());
        assert_eq!(cfg.graph, GraphKind::Grid8);
    }

    #[test]
    fn target_replaces_default_delta() {
        let mut p = rgbd();
        p.push(("target_segments".into(), "500".into()));
        let cfg = RunConfig::from_pairs(&p).unwrap();
        assert_eq!((cfg.delta, cfg.target_segments), (None, Some(500)));
        assert!(cfg.validate().is_empty());
        p.push(("delta".into(), "3".into()));
        let cfg = RunConfig::from_pairs(&p).unwrap();
        assert_eq!(cfg.validate()[0].field, "delta");
    }

    #[test]
    fn diagnostics_name_fields() {
        let mut p = rgbd();
        p.extend(pairs(&[("graph", "knn"), ("k", "0")]));
        let fields: Vec<_> = RunConfig::from_pairs(&p).unwrap().validate().iter().map(|d| d.field).collect();
        assert_eq!(fields, vec!["k"]);

        let mut p = rgbd();
        p.extend(pairs(&[("preset", "lv_fpfh"), ("estimate_normals", "false")]));
        let diags = RunConfig::from_pairs(&p).unwrap().validate();
        assert_eq!(diags.len(), 1);
        assert!(diags[0].to_string().contains("normals"));

        let diags = RunConfig::from_pairs(&[]).unwrap().validate();
        assert_eq!(diags[0].field, "input_ply");
    }

    #[test]
    fn unknown_keys_and_values_are_rejected() {
        assert!(RunConfig::from_pairs(&pairs(&[("colour", "1")])).is_err());
        assert!(RunConfig::from_pairs(&pairs(&[("preset", "fancy")])).is_err());
        assert!(RunConfig::from_pairs(&pairs(&[("mode", "both")])).is_err());
        assert!(RunConfig::from_pairs(&pairs(&[("k", "eight")])).is_err());
        assert!(parse_pairs("just text").is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let mut p = rgbd();
        p.extend(pairs(&[
            ("mode", "linear"),
            ("k_c", "0.5"),
            ("delta", "0.1"),
            ("out_labels", "out/l.txt"),
            ("unsigned_normals", "false"),
        ]));
        let cfg = RunConfig::from_pairs(&p).unwrap();
        let text = cfg.to_text();
        let again = RunConfig::from_pairs(&parse_pairs(&text).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
