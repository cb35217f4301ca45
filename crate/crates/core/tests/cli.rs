use std::path::Path;
use std::process::{Command, Output};

use pclv::cloud::load_ply;
use pclv::eval::{evaluate, LabelImage, SWEEP_CSV_HEADER};
use pclv::synthetic::room_frame;

fn pclv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pclv")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(out: &str, key: &str) -> String {
    out.lines()
        .flat_map(|l| l.split_whitespace())
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in {out:?}"))
}

/// Writes a small RGB-D frame and returns `(depth, rgb, intrinsics, gt)`.
fn frame_files(dir: &Path, w: usize, h: usize, seed: u64) -> [String; 4] {
    let frame = room_frame(w, h, seed);
    let paths = ["depth.png", "rgb.png", "intrinsics.txt", "gt.png"].map(|n| dir.join(n));
    frame.depth.save_png(&paths[0]).unwrap();
    frame.rgb.save_png(&paths[1]).unwrap();
    std::fs::write(&paths[2], frame.intrinsics.to_text()).unwrap();
    frame.ground_truth.save_png(&paths[3]).unwrap();
    paths.map(|p| p.display().to_string())
}

#[test]
fn segment_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let [depth, rgb, intr, _] = frame_files(dir.path(), 64, 48, 1);
    let labels = dir.path().join("labels.txt");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# corner of a room\ninput_depth = {depth}\ninput_rgb = {rgb}\nintrinsics = {intr}\ndelta = 0.5\nout_labels = {}\n",
            labels.display()
        ),
    )
    .unwrap();
    let o = pclv(&["segment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let n_points: usize = value(&out, "n_points").parse().unwrap();
    assert!(n_points > 3000 && n_points <= 64 * 48);
    assert_eq!(value(&out, "delta"), "0.5");
    let n: usize = value(&out, "n_segments").parse().unwrap();
    let written = std::fs::read_to_string(&labels).unwrap();
    assert_eq!(written.lines().count(), n_points);
    let distinct: std::collections::BTreeSet<&str> =
        written.lines().map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(distinct.len(), n);

    // flags override the file
    let o = pclv(&["segment", "--config", cfg.to_str().unwrap(), "--delta", "2"]);
    assert_eq!(value(&stdout(&o), "delta"), "2");
}

#[test]
fn missing_input_is_a_runtime_error_naming_the_path() {
    let o = pclv(&["segment", "--ply", "/nonexistent/scan.ply"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/scan.ply"), "{}", stderr(&o));
}

#[test]
fn usage_and_validation_errors_exit_1() {
    assert_eq!(pclv(&["segment", "--bogus"]).status.code(), Some(1));
    assert_eq!(pclv(&["frobnicate"]).status.code(), Some(1));
    let o = pclv(&["segment", "--ply", "x.ply", "--graph", "knn"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k:"), "{}", stderr(&o));
    let o = pclv(&["segment", "--ply", "x.ply", "--set", "colour=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(pclv(&["segment", "--ply", "x.ply", "--preset", "nope"]).status.code(), Some(1));
}

#[test]
fn target_segments_engages_search_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let [depth, rgb, intr, _] = frame_files(dir.path(), 160, 120, 2);
    let labels = dir.path().join("labels.txt");
    let labels_s = labels.to_str().unwrap();
    let o = pclv(&[
        "segment", "--depth", &depth, "--rgb", &rgb, "--intrinsics", &intr, "--preset", "pclv",
        "--target-segments", "500", "--out-labels", labels_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(value(&out, "target_segments"), "500");
    assert_eq!(value(&out, "target_hit"), "true");
    let n: usize = value(&out, "n_segments").parse().unwrap();
    assert!(n.abs_diff(500) <= 25);

    let meta = format!("{labels_s}.json");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(json["delta"].as_f64().unwrap().to_string(), value(&out, "delta"));

    let replayed = dir.path().join("replayed.txt");
    let o = pclv(&["segment", "--replay", &meta, "--out-labels", replayed.to_str().unwrap(), "--out-meta", "none"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&replayed).unwrap(),
        std::fs::read_to_string(&labels).unwrap()
    );
}

#[test]
fn eval_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let gt = room_frame(64, 48, 3).ground_truth;
    let other = room_frame(64, 48, 4).ground_truth;
    let (gt_path, pred_path) = (dir.path().join("gt.png"), dir.path().join("pred.png"));
    gt.save_png(&gt_path).unwrap();
    other.save_png(&pred_path).unwrap();
    let (g, p) = (gt_path.to_str().unwrap(), pred_path.to_str().unwrap());

    let o = pclv(&["eval", "--pred", g, "--gt", g, "--ignore-zero"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(value(&out, "BR"), "1");
    assert_eq!(value(&out, "UE"), "0");

    let csv = dir.path().join("eval.csv");
    let o = pclv(&["eval", "--pred", p, "--gt", g, "--ignore-zero", "--out-csv", csv.to_str().unwrap()]);
    let out = stdout(&o);
    // both files store label + 1 with 0 for holes
    let m = evaluate(&gt, &other, 2.0).unwrap();
    assert_eq!(value(&out, "BR").parse::<f64>().unwrap(), m.boundary_recall);
    assert_eq!(value(&out, "UE").parse::<f64>().unwrap(), m.under_seg_error);
    assert_eq!(value(&out, "N").parse::<usize>().unwrap(), other.distinct_labels().len());
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
    assert_eq!(text.lines().count(), 2);

    let m3 = evaluate(&gt, &other, 3.0).unwrap();
    let o = pclv(&["eval", "--pred", p, "--gt", g, "--ignore-zero", "--d", "3"]);
    assert_eq!(value(&stdout(&o), "BR").parse::<f64>().unwrap(), m3.boundary_recall);
}

#[test]
fn eval_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    LabelImage::from_fn(8, 8, |_, _| Some(0)).unwrap().save_png(&a).unwrap();
    LabelImage::from_fn(8, 9, |_, _| Some(0)).unwrap().save_png(&b).unwrap();
    let o = pclv(&["eval", "--pred", a.to_str().unwrap(), "--gt", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    let [depth, rgb, intr, gt] = frame_files(dir.path(), 160, 120, 5);
    let run = |name: &str| {
        let csv = dir.path().join(name);
        let o = pclv(&[
            "sweep", "--depth", &depth, "--rgb", &rgb, "--intrinsics", &intr, "--gt", &gt, "--ignore-zero",
            "--targets", "200,500,1200", "--out-csv", csv.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(stdout(&o).lines().count(), 3);
        std::fs::read(csv).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
    assert_eq!(text.lines().count(), 4);

    let o = pclv(&["sweep", "--depth", &depth, "--rgb", &rgb, "--intrinsics", &intr, "--gt", &gt, "--targets", ""]);
    assert_eq!(o.status.code(), Some(1));
    let o = pclv(&[
        "sweep", "--depth", &depth, "--rgb", &rgb, "--intrinsics", &intr, "--gt", &gt, "--ignore-zero",
        "--deltas", "0.1,1,10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "delta"), "0.1");
}

#[test]
fn convert_round_trips_into_segment() {
    let dir = tempfile::tempdir().unwrap();
    let [depth, rgb, intr, _] = frame_files(dir.path(), 80, 60, 6);
    let ply = dir.path().join("frame.ply");
    let ply_s = ply.to_str().unwrap();
    let o = pclv(&["convert", "--depth", &depth, "--rgb", &rgb, "--intrinsics", &intr, "--out", ply_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let direct = dir.path().join("direct.txt");
    let via = dir.path().join("via.txt");
    let o = pclv(&["segment", "--depth", &depth, "--rgb", &rgb, "--intrinsics", &intr, "--out-labels", direct.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = pclv(&["segment", "--ply", ply_s, "--out-labels", via.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(&direct).unwrap(), std::fs::read(&via).unwrap());

    let colored = dir.path().join("colored.ply");
    let o = pclv(&["convert", "--ply", ply_s, "--labels", via.to_str().unwrap(), "--out", colored.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cloud = load_ply(&colored).unwrap();
    let labels: Vec<usize> = std::fs::read_to_string(&via)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    let mut color_of = std::collections::HashMap::new();
    for (l, c) in labels.iter().zip(cloud.colors()) {
        let key = c.map(|v| (v * 255.0).round() as u8);
        assert_eq!(*color_of.entry(*l).or_insert(key), key, "label {l} has two colors");
    }
}

#[test]
fn convert_rejects_bad_intrinsics() {
    let dir = tempfile::tempdir().unwrap();
    let [depth, rgb, _, _] = frame_files(dir.path(), 16, 12, 7);
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "525 525 319.5\n").unwrap();
    let o = pclv(&[
        "convert", "--depth", &depth, "--rgb", &rgb, "--intrinsics", bad.to_str().unwrap(), "--out",
        dir.path().join("x.ply").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.txt"));
}
