//! Boundary recall and under-segmentation error on small label images whose
//! scores can be checked by hand.

use pclv::eval::{boundary_mask, boundary_recall, evaluate, under_segmentation_error, LabelImage};

fn main() -> pclv::Result<()> {
    // ground truth: left and right halves of a 20x12 image
    let gt = LabelImage::from_fn(20, 12, |_, c| Some(u32::from(c >= 10)))?;
    println!("ground truth: {} boundary pixels", boundary_mask(&gt).count());

    let shifted = |offset: usize| LabelImage::from_fn(20, 12, move |_, c| Some(u32::from(c >= 10 + offset)));
    for offset in 0..5 {
        let pred = shifted(offset)?;
        let m = evaluate(&gt, &pred, 2.0)?;
        println!("split moved {offset} px: BR {:.2}  UE {:.1}", m.boundary_recall, m.under_seg_error);
    }

    // finer segments: every GT boundary is found, nothing leaks
    let grid = LabelImage::from_fn(20, 12, |r, c| Some((r / 4 * 5 + c / 5) as u32))?;
    let (ue, n_gt) = under_segmentation_error(&gt, &grid)?;
    let br = boundary_recall(&boundary_mask(&gt), &boundary_mask(&grid), 2.0)?;
    println!("4x3 blocks over {n_gt} ground-truth segments: BR {br:.2}, UE {ue:.1}");

    // holes in the ground truth are skipped
    let holey = LabelImage::from_fn(20, 12, |r, c| (r > 1).then_some(u32::from(c >= 10)))?;
    println!("with unlabeled rows: {:?}", evaluate(&holey, &shifted(1)?, 2.0)?);
    Ok(())
}
