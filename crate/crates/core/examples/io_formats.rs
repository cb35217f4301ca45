//! Round trips through the file formats: 16-bit depth PNG, RGB PNG,
//! intrinsics text, ASCII and binary PLY, label text files and label PNGs.

use pclv::cloud::{
    backproject_depth, load_color_image, load_depth_image, load_label_image, load_ply, write_ply, CameraIntrinsics,
    PlyEncoding, PlyOptions, PlyPrecision,
};
use pclv::synthetic::room_frame;
use pclv::Segmentation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("pclv_io_formats");
    std::fs::create_dir_all(&dir)?;
    let frame = room_frame(64, 48, 2);

    let depth_path = dir.join("depth.png");
    frame.depth.save_png(&depth_path)?;
    assert_eq!(load_depth_image(&depth_path)?, frame.depth);
    let rgb_path = dir.join("rgb.png");
    frame.rgb.save_png(&rgb_path)?;
    assert_eq!(load_color_image(&rgb_path)?, frame.rgb);
    let text = frame.intrinsics.to_text();
    println!("intrinsics file: {}", text.trim());
    assert_eq!(CameraIntrinsics::parse(&text)?, frame.intrinsics);

    let cloud = backproject_depth(&frame.depth, &frame.rgb, &frame.intrinsics)?;
    for (encoding, precision) in [
        (PlyEncoding::Ascii, PlyPrecision::F64),
        (PlyEncoding::BinaryLittleEndian, PlyPrecision::F32),
        (PlyEncoding::BinaryLittleEndian, PlyPrecision::F64),
    ] {
        let path = dir.join(format!("cloud_{encoding:?}_{precision:?}.ply"));
        write_ply(&cloud, &path, PlyOptions { encoding, precision })?;
        let back = load_ply(&path)?;
        let max_err = back
            .positions()
            .iter()
            .zip(cloud.positions())
            .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
            .fold(0.0, f64::max);
        println!("{encoding:?}/{precision:?}: {} bytes, max position error {max_err:.2e}", std::fs::metadata(&path)?.len());
    }

    let seg = Segmentation::from_labels((0..cloud.len()).map(|i| i % 5).collect());
    let labels_path = dir.join("labels.txt");
    seg.write_labels(&labels_path)?;
    assert_eq!(Segmentation::read_labels(&labels_path)?.labels(), seg.labels());

    let gt_path = dir.join("gt.png");
    frame.ground_truth.save_png(&gt_path)?;
    let gt = load_label_image(&gt_path)?.without_zero();
    println!("ground truth: {} labels, files in {}", gt.distinct_labels().len(), dir.display());
    Ok(())
}
