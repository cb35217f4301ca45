//! Command-line front end. Every subcommand prints `key=value` lines on
//! stdout; diagnostics go to stderr.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cloud::{
    backproject_depth, load_color_image, load_depth_image, load_label_image, load_ply, write_ply,
    write_segmented_ply, CameraIntrinsics, PlyEncoding, PlyOptions, PlyPrecision,
};
use crate::error::{Error, Result};
use crate::eval::{self, MetricsRecord};
use crate::merge::Segmentation;
use crate::pipeline::{self, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pclv", version, about = "Point-cloud over-segmentation with Local Variation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a point cloud or an RGB-D frame.
    Segment(SegmentArgs),
    /// Score a predicted label image against ground truth.
    Eval(EvalArgs),
    /// Metric curves over segment-count targets or a δ grid.
    Sweep(SweepArgs),
    /// RGB-D frame to PLY, or a labels file to a colorized PLY.
    Convert(ConvertArgs),
}

/// Flags shared by `segment` and `sweep`; each maps onto a config key.
#[derive(Debug, Args, Default)]
struct RunArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    ply: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    rgb: Option<String>,
    /// 5-value file (fx fy cx cy depth_scale) or `nyu`.
    #[arg(long)]
    intrinsics: Option<String>,
    #[arg(long, value_parser = ["grid8", "knn", "radius", "delaunay"])]
    graph: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    target_segments: Option<String>,
    /// Preset name or comma list, e.g. `color,normal`.
    #[arg(long)]
    modalities: Option<String>,
    #[arg(long, value_parser = ["multi", "linear"])]
    mode: Option<String>,
    #[arg(long)]
    k_c: Option<String>,
    #[arg(long)]
    k_d: Option<String>,
    #[arg(long)]
    k_n: Option<String>,
    /// auto, true or false. A bare flag means true.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    unsigned_normals: Option<String>,
    #[arg(long)]
    normal_k: Option<String>,
    #[arg(long)]
    fpfh_k: Option<String>,
    #[arg(long)]
    no_postprocess: bool,
    #[arg(long)]
    postprocess_segments: Option<String>,
    #[arg(long)]
    descriptor_cache: Option<String>,
    #[arg(long)]
    gt: Option<String>,
    /// Treat ground-truth label 0 as unlabeled.
    #[arg(long)]
    ignore_zero: bool,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    out_labels: Option<String>,
    #[arg(long)]
    out_ply: Option<String>,
    #[arg(long)]
    out_meta: Option<String>,
    #[arg(long)]
    out_label_image: Option<String>,
    #[arg(long)]
    out_csv: Option<String>,
    /// Any config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn pairs(&self) -> std::result::Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        };
        put("preset", &self.preset);
        put("input_ply", &self.ply);
        put("input_depth", &self.depth);
        put("input_rgb", &self.rgb);
        put("intrinsics", &self.intrinsics);
        put("graph", &self.graph);
        put("k", &self.k);
        put("radius", &self.radius);
        put("delta", &self.delta);
        put("target_segments", &self.target_segments);
        put("modalities", &self.modalities);
        put("mode", &self.mode);
        put("k_c", &self.k_c);
        put("k_d", &self.k_d);
        put("k_n", &self.k_n);
        put("unsigned_normals", &self.unsigned_normals);
        put("normal_k", &self.normal_k);
        put("fpfh_k", &self.fpfh_k);
        put("postprocess_segments", &self.postprocess_segments);
        put("descriptor_cache", &self.descriptor_cache);
        put("gt", &self.gt);
        put("d", &self.d);
        put("out_labels", &self.out_labels);
        put("out_ply", &self.out_ply);
        put("out_meta", &self.out_meta);
        put("out_label_image", &self.out_label_image);
        put("out_csv", &self.out_csv);
        if self.no_postprocess {
            out.push(("postprocess".into(), "false".into()));
        }
        if self.ignore_zero {
            out.push(("gt_ignore_zero".into(), "true".into()));
        }
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    fn resolve(&self) -> std::result::Result<RunConfig, Failure> {
        let flags = self.pairs().map_err(Failure::Usage)?;
        let cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Failure::Runtime(Error::io(path, e)))?;
                let file = pipeline::parse_pairs(&text).map_err(|e| Failure::Usage(e.to_string()))?;
                RunConfig::resolve(&file, &flags)
            }
            None => RunConfig::resolve(&[], &flags),
        }
        .map_err(|e| Failure::Usage(e.to_string()))?;
        let diags = cfg.validate();
        if !diags.is_empty() {
            return Err(Failure::Usage(
                diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"),
            ));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Re-run from a metadata sidecar, with the δ it recorded.
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted 16-bit label image (as written by `segment --out-label-image`).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = eval::DEFAULT_BOUNDARY_DISTANCE)]
    d: f64,
    /// Treat ground-truth label 0 as unlabeled.
    #[arg(long)]
    ignore_zero: bool,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated segment-count targets.
    #[arg(long, value_delimiter = ',', conflicts_with = "deltas")]
    targets: Option<Vec<usize>>,
    /// Comma-separated δ values.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    depth: Option<PathBuf>,
    #[arg(long)]
    rgb: Option<PathBuf>,
    #[arg(long)]
    intrinsics: Option<String>,
    /// Source cloud for colorizing labels.
    #[arg(long)]
    ply: Option<PathBuf>,
    /// Labels file (`index label` per line) to colorize.
    #[arg(long, requires = "ply")]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ascii: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = std::result::Result<Vec<String>, Failure>;

/// Runs the CLI on the process arguments and returns the exit code.
pub fn main() -> i32 {
    run_with(std::env::args_os())
}

/// Runs the CLI on explicit arguments; the first one is the program name.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Segment(a) => cmd_segment(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Convert(a) => cmd_convert(&a),
    };
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn cmd_segment(a: &SegmentArgs) -> CmdResult {
    let cfg = match &a.replay {
        Some(meta) => {
            let base = pipeline::load_replay(meta).map_err(|e| Failure::Usage(e.to_string()))?;
            let flags = a.run.pairs().map_err(Failure::Usage)?;
            RunConfig::resolve(&base.to_pairs(), &flags).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => a.run.resolve()?,
    };
    let out = pipeline::run(&cfg)?;
    let r = &out.report;
    let mut lines = vec![
        format!("n_points={}", r.n_points),
        format!("n_edges={}", r.n_edges),
        format!("n_segments={}", r.n_segments),
        format!("delta={}", r.delta),
    ];
    if let Some(t) = r.target_segments {
        lines.push(format!("target_segments={t}"));
        lines.push(format!("target_hit={}", r.target_hit.unwrap_or(false)));
    }
    if let Some(m) = &out.metrics {
        lines.push(format!("boundary_recall={}", m.boundary_recall));
        lines.push(format!("under_seg_error={}", m.under_seg_error));
    }
    lines.push(format!("time_ms={:.1}", r.total_seconds() * 1e3));
    Ok(lines)
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    if !(a.d >= 0.0 && a.d.is_finite()) {
        return Err(Failure::Usage(format!("--d must be a finite non-negative distance, got {}", a.d)));
    }
    let pred = load_label_image(&a.pred)?.without_zero();
    let gt = load_label_image(&a.gt)?;
    let gt = if a.ignore_zero { gt.without_zero() } else { gt };
    let m = eval::evaluate(&gt, &pred, a.d)?;
    let n = pred.distinct_labels().len();
    if let Some(p) = &a.out_csv {
        let record = MetricsRecord {
            n_segments: n,
            boundary_recall: m.boundary_recall,
            under_seg_error: m.under_seg_error,
            delta: f64::NAN,
            graph: String::new(),
            modalities: String::new(),
            mode: String::new(),
            target: None,
            flags: Vec::new(),
        };
        eval::write_sweep_csv(p, &[record])?;
    }
    Ok(vec![format!("BR={} UE={} N={}", m.boundary_recall, m.under_seg_error, n)])
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let cfg = a.run.resolve()?;
    if cfg.gt.is_none() {
        return Err(Failure::Usage("sweep needs --gt".into()));
    }
    let prepared = pipeline::prepare(&cfg)?;
    let points = match (&a.targets, &a.deltas) {
        (Some(t), _) if t.is_empty() => return Err(Failure::Usage("--targets is empty".into())),
        (Some(t), _) => pipeline::sweep_prepared(&cfg, &prepared, t)?,
        (None, Some(d)) if d.is_empty() => return Err(Failure::Usage("--deltas is empty".into())),
        (None, Some(d)) => pipeline::sweep_deltas(&cfg, &prepared, d)?,
        (None, None) => return Err(Failure::Usage("sweep needs --targets or --deltas".into())),
    };
    let records: Vec<MetricsRecord> = points.into_iter().map(|p| p.record).collect();
    if let Some(p) = &cfg.out_csv {
        eval::write_sweep_csv(p, &records)?;
    }
    Ok(records
        .iter()
        .map(|r| {
            let mut line = format!(
                "delta={} n_segments={} boundary_recall={} under_seg_error={}",
                r.delta, r.n_segments, r.boundary_recall, r.under_seg_error
            );
            if !r.flags.is_empty() {
                line.push_str(&format!(" flags={}", r.flags.join("|")));
            }
            line
        })
        .collect())
}

fn load_intrinsics(spec: &str) -> Result<CameraIntrinsics> {
    if spec == "nyu" {
        Ok(CameraIntrinsics::nyu())
    } else {
        CameraIntrinsics::load(Path::new(spec))
    }
}

fn cmd_convert(a: &ConvertArgs) -> CmdResult {
    let opts = PlyOptions {
        encoding: if a.ascii {
            PlyEncoding::Ascii
        } else {
            PlyEncoding::BinaryLittleEndian
        },
        precision: PlyPrecision::F64,
    };
    match (&a.depth, &a.rgb, &a.intrinsics, &a.ply, &a.labels) {
        (Some(depth), Some(rgb), Some(intr), None, None) => {
            let intr = load_intrinsics(intr)?;
            let cloud = backproject_depth(&load_depth_image(depth)?, &load_color_image(rgb)?, &intr)?;
            write_ply(&cloud, &a.out, opts)?;
            Ok(vec![format!("n_points={}", cloud.len())])
        }
        (None, None, None, Some(ply), Some(labels)) => {
            let cloud = load_ply(ply)?;
            let seg = Segmentation::read_labels(labels)?;
            if seg.len() != cloud.len() {
                return Err(Failure::Runtime(Error::DimensionMismatch(format!(
                    "labels cover {} points, cloud has {}",
                    seg.len(),
                    cloud.len()
                ))));
            }
            write_segmented_ply(&cloud, &seg, &a.out)?;
            Ok(vec![
                format!("n_points={}", cloud.len()),
                format!("n_segments={}", seg.n_segments()),
            ])
        }
        _ => Err(Failure::Usage(
            "convert needs either --depth --rgb --intrinsics, or --ply --labels".into(),
        )),
    }
}
