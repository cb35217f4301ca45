use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::eval::LabelImage;

/// Raw 16-bit depth image, row-major. A value of 0 marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} depth samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(DepthImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.data.clone())
                .expect("buffer length checked at construction");
        buf.save(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
    }
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} color samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(ColorImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.data[row * self.width + col]
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let flat: Vec<u8> = self.data.iter().flatten().copied().collect();
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, flat)
                .expect("buffer length checked at construction");
        buf.save(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
    }
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}

/// Loads a 16-bit single-channel PNG or PGM depth image.
pub fn load_depth_image(path: &Path) -> Result<DepthImage> {
    match open(path)? {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            DepthImage::new(w as usize, h as usize, buf.into_raw())
        }
        other => Err(Error::format(
            path,
            format!("depth must be 16-bit single-channel, found {:?}", other.color()),
        )),
    }
}

/// Loads an 8-bit color image; grayscale sources are replicated to RGB.
pub fn load_color_image(path: &Path) -> Result<ColorImage> {
    let img = open(path)?;
    match img {
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) | DynamicImage::ImageLuma8(_) => {}
        ref other => {
            return Err(Error::format(
                path,
                format!("color image must be 8-bit, found {:?}", other.color()),
            ))
        }
    }
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.pixels().map(|p| p.0).collect();
    ColorImage::new(w as usize, h as usize, data)
}

/// Loads a 16-bit single-channel label image; pixel values are segment ids.
pub fn load_label_image(path: &Path) -> Result<LabelImage> {
    match open(path)? {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            let labels = buf.into_raw().into_iter().map(|v| Some(v as u32)).collect();
            LabelImage::new(w as usize, h as usize, labels)
        }
        other => Err(Error::format(
            path,
            format!(
                "label image must be 16-bit single-channel, found {:?}",
                other.color()
            ),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn depth_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let d = DepthImage::new(3, 2, vec![0, 1, 2, 65535, 1000, 7]).unwrap();
        d.save_png(&path).unwrap();
        assert_eq!(load_depth_image(&path).unwrap(), d);
    }

    #[test]
    fn depth_pgm_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pgm");
        // 16-bit binary PGM is big-endian
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x03, 0xE8, 0x00, 0x00]);
        std::fs::write(&path, bytes).unwrap();
        let d = load_depth_image(&path).unwrap();
        assert_eq!(d.data(), &[1000, 0]);
    }

    #[test]
    fn eight_bit_depth_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d8.png");
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(2, 2, vec![1, 2, 3, 4]).unwrap();
        buf.save(&path).unwrap();
        assert!(load_depth_image(&path).is_err());
        assert!(load_label_image(&path).is_err());
    }

    fn save_labels(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u16) {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| Luma([f(x, y)]));
        buf.save(path).unwrap();
    }

    #[test]
    fn uniform_label_image_has_one_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.png");
        save_labels(&path, 5, 4, |_, _| 9);
        let img = load_label_image(&path).unwrap();
        assert_eq!(img.distinct_labels(), vec![9]);
    }

    #[test]
    fn checkerboard_labels_split_evenly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        save_labels(&path, 6, 6, |x, y| 1 + ((x + y) % 2) as u16);
        let img = load_label_image(&path).unwrap();
        let mut counts = BTreeMap::new();
        for l in img.iter().flatten() {
            *counts.entry(l).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 2);
        assert_eq!(counts[&1], counts[&2]);
    }

    #[test]
    fn label_count_matches_histogram() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.png");
        let f = |x: u32, y: u32| ((x * 7 + y * 13) % 11 * 900) as u16;
        save_labels(&path, 32, 24, f);
        let mut hist = vec![0usize; 65536];
        for y in 0..24 {
            for x in 0..32 {
                hist[f(x, y) as usize] += 1;
            }
        }
        let expected = hist.iter().filter(|&&c| c > 0).count();
        assert_eq!(load_label_image(&path).unwrap().distinct_labels().len(), expected);
    }
}
