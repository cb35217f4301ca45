//! PLY vertex I/O (ASCII and binary little-endian).
//!
//! Besides the standard `x y z`, `red green blue`, `nx ny nz` and `intensity`
//! vertex properties, two conventions carry RGB-D structure through a file:
//! `comment grid <width> <height>` together with per-vertex `row`/`col`
//! properties restores the image grid, and `comment viewpoint <x> <y> <z>`
//! restores the sensor origin.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GridMapping, Point3, PointCloud, Rgb, DEFAULT_COLOR};
use crate::error::{Error, Result};
use crate::merge::Segmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    /// Value that maps to full intensity for color channels.
    fn color_full_scale(self) -> Option<f64> {
        match self {
            Scalar::U8 => Some(255.0),
            Scalar::U16 => Some(65535.0),
            Scalar::F32 | Scalar::F64 => None,
            _ => Some(1.0),
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

/// Storage width of written positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyPrecision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlyOptions {
    pub encoding: PlyEncoding,
    pub precision: PlyPrecision,
}

impl Default for PlyOptions {
    fn default() -> Self {
        PlyOptions {
            encoding: PlyEncoding::BinaryLittleEndian,
            precision: PlyPrecision::F32,
        }
    }
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    grid_dims: Option<(usize, usize)>,
    viewpoint: Option<Point3>,
}

fn read_header<R: BufRead>(reader: &mut R, path: &Path) -> Result<Header> {
    let bad = |m: String| Error::format(path, m);
    let mut line = String::new();
    let mut next_line = |reader: &mut R| -> Result<Option<String>> {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        Ok(if n == 0 {
            None
        } else {
            Some(line.trim_end_matches(['\r', '\n']).to_string())
        })
    };

    match next_line(reader)? {
        Some(l) if l.trim() == "ply" => {}
        _ => return Err(bad("missing 'ply' magic".into())),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut grid_dims = None;
    let mut viewpoint = None;
    loop {
        let l = next_line(reader)?.ok_or_else(|| bad("header ended before end_header".into()))?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(bad(format!("unsupported PLY version {version}")));
                }
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(bad(format!("unsupported PLY format {other}"))),
                });
            }
            ["comment", "grid", w, h] => {
                let w = w.parse().map_err(|_| bad(format!("bad grid width {w:?}")))?;
                let h = h.parse().map_err(|_| bad(format!("bad grid height {h:?}")))?;
                grid_dims = Some((w, h));
            }
            ["comment", "viewpoint", x, y, z] => {
                let p = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("bad viewpoint {t:?}")));
                viewpoint = Some([p(x)?, p(y)?, p(z)?]);
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| bad(format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| bad("property before any element".into()))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| bad(format!("unsupported list count type {count}")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| bad(format!("unsupported list item type {item}")))?;
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| bad("property before any element".into()))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| bad(format!("unsupported property type {ty}")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(bad(format!("malformed header line {l:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| bad("header has no format line".into()))?;
    Ok(Header {
        encoding,
        elements,
        grid_dims,
        viewpoint,
    })
}

/// Pulls one element instance's scalar values, discarding list payloads.
trait RowSource {
    fn row(&mut self, el: &Element, out: &mut Vec<f64>) -> std::result::Result<(), String>;
}

struct AsciiRows<R> {
    reader: R,
    line: String,
}

impl<R: BufRead> RowSource for AsciiRows<R> {
    fn row(&mut self, el: &Element, out: &mut Vec<f64>) -> std::result::Result<(), String> {
        loop {
            self.line.clear();
            let n = self.reader.read_line(&mut self.line).map_err(|e| e.to_string())?;
            if n == 0 {
                return Err(format!("file ended before all {} '{}' rows were read", el.count, el.name));
            }
            if !self.line.trim().is_empty() {
                break;
            }
        }
        out.clear();
        let mut tokens = self.line.split_whitespace();
        let mut next = |what: &str, ty: Scalar| -> std::result::Result<f64, String> {
            let t = tokens
                .next()
                .ok_or_else(|| format!("'{}' row is missing {what}", el.name))?;
            let bad = |_| format!("not a number: {t:?}");
            // parse at the declared width so float32 text round-trips exactly
            match ty {
                Scalar::F32 => t.parse::<f32>().map(f64::from).map_err(bad),
                _ => t.parse::<f64>().map_err(bad),
            }
        };
        for prop in &el.properties {
            match *prop {
                Property::Scalar { ref name, ty } => out.push(next(name, ty)?),
                Property::List { count, item } => {
                    let c = next("a list count", count)?;
                    for _ in 0..c as usize {
                        next("a list item", item)?;
                    }
                }
            }
        }
        if tokens.next().is_some() {
            return Err(format!("'{}' row has more values than declared properties", el.name));
        }
        Ok(())
    }
}

struct BinaryRows<R> {
    reader: R,
    buf: [u8; 8],
}

impl<R: Read> BinaryRows<R> {
    fn scalar(&mut self, ty: Scalar, el: &Element) -> std::result::Result<f64, String> {
        let n = ty.size();
        self.reader
            .read_exact(&mut self.buf[..n])
            .map_err(|_| format!("file ended before all {} '{}' rows were read", el.count, el.name))?;
        Ok(ty.read_le(&self.buf[..n]))
    }
}

impl<R: Read> RowSource for BinaryRows<R> {
    fn row(&mut self, el: &Element, out: &mut Vec<f64>) -> std::result::Result<(), String> {
        out.clear();
        for prop in &el.properties {
            match *prop {
                Property::Scalar { ty, .. } => {
                    let v = self.scalar(ty, el)?;
                    out.push(v);
                }
                Property::List { count, item } => {
                    let c = self.scalar(count, el)?;
                    for _ in 0..c as usize {
                        self.scalar(item, el)?;
                    }
                }
            }
        }
        Ok(())
    }
}

struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<([usize; 3], Scalar)>,
    intensity: Option<(usize, Scalar)>,
    normal: Option<[usize; 3]>,
    pixel: Option<[usize; 2]>,
}

fn vertex_layout(el: &Element, path: &Path) -> Result<VertexLayout> {
    let mut names = Vec::new();
    for prop in &el.properties {
        match prop {
            Property::Scalar { name, ty } => names.push((name.as_str(), *ty)),
            Property::List { .. } => {
                return Err(Error::format(path, "list properties on vertices are unsupported"))
            }
        }
    }
    let find = |n: &str| names.iter().position(|(name, _)| *name == n);
    let triple = |a: &str, b: &str, c: &str| match (find(a), find(b), find(c)) {
        (Some(i), Some(j), Some(k)) => Some([i, j, k]),
        _ => None,
    };
    let xyz = triple("x", "y", "z")
        .ok_or_else(|| Error::format(path, "vertex element lacks x, y, z properties"))?;
    let rgb = triple("red", "green", "blue").map(|idx| (idx, names[idx[0]].1));
    let intensity = find("intensity").map(|i| (i, names[i].1));
    let normal = triple("nx", "ny", "nz");
    let pixel = match (find("row"), find("col")) {
        (Some(r), Some(c)) => Some([r, c]),
        _ => None,
    };
    Ok(VertexLayout {
        xyz,
        rgb,
        intensity,
        normal,
        pixel,
    })
}

/// Loads a point cloud from a PLY file.
///
/// 8-bit colors are rescaled to `[0, 1]`; a lone `intensity` property is
/// replicated into all three channels; points without color get
/// [`DEFAULT_COLOR`]. Normals present in the file are renormalized.
pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let header = read_header(&mut reader, path)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::format(path, "no vertex element"))?;
    let vertex = header.elements[vertex_pos].clone();
    let layout = vertex_layout(&vertex, path)?;

    let mut source: Box<dyn RowSource> = match header.encoding {
        PlyEncoding::Ascii => Box::new(AsciiRows {
            reader,
            line: String::new(),
        }),
        PlyEncoding::BinaryLittleEndian => Box::new(BinaryRows { reader, buf: [0; 8] }),
    };
    let mut row = Vec::new();
    for el in &header.elements[..vertex_pos] {
        for _ in 0..el.count {
            source.row(el, &mut row).map_err(|m| Error::format(path, m))?;
        }
    }

    let n = vertex.count;
    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut raw_intensity = Vec::new();
    let mut normals = Vec::new();
    let mut pixels = Vec::new();
    for _ in 0..n {
        source.row(&vertex, &mut row).map_err(|m| Error::format(path, m))?;
        let [x, y, z] = layout.xyz;
        positions.push([row[x], row[y], row[z]]);
        if let Some((idx, ty)) = layout.rgb {
            let c: Rgb = match ty.color_full_scale() {
                Some(full) => idx.map(|i| row[i] / full),
                None => idx.map(|i| row[i]),
            };
            colors.push(c.map(|v| v.clamp(0.0, 1.0)));
        } else if let Some((i, _)) = layout.intensity {
            raw_intensity.push(row[i]);
        }
        if let Some(idx) = layout.normal {
            normals.push(idx.map(|i| row[i]));
        }
        if let Some([r, c]) = layout.pixel {
            if row[r] < 0.0 || row[c] < 0.0 {
                return Err(Error::format(path, "negative row/col property"));
            }
            pixels.push((row[r] as usize, row[c] as usize));
        }
    }

    if layout.rgb.is_none() {
        colors = match layout.intensity {
            Some((_, ty)) => {
                let full = ty.color_full_scale().unwrap_or_else(|| {
                    // float intensities are taken verbatim unless they exceed 1
                    let max = raw_intensity.iter().cloned().fold(0.0, f64::max);
                    if max > 1.0 {
                        max
                    } else {
                        1.0
                    }
                });
                raw_intensity
                    .iter()
                    .map(|v| {
                        let i = (v / full).clamp(0.0, 1.0);
                        [i, i, i]
                    })
                    .collect()
            }
            None => vec![DEFAULT_COLOR; n],
        };
    }

    let mut cloud = PointCloud::new(positions, colors).map_err(|e| Error::format(path, e.to_string()))?;
    if layout.normal.is_some() {
        let unit = normals
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                if len > 0.0 && len.is_finite() {
                    Ok(n.map(|v| v / len))
                } else {
                    Err(Error::format(path, format!("normal {i} has zero length")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        cloud = cloud.with_normals(unit)?;
    }
    if let (Some((w, h)), Some(_)) = (header.grid_dims, layout.pixel) {
        let grid = GridMapping::new(w, h, pixels).map_err(|e| Error::format(path, e.to_string()))?;
        cloud = cloud.with_grid(grid)?;
    }
    if let Some(vp) = header.viewpoint {
        cloud = cloud.with_viewpoint(vp);
    }
    Ok(cloud)
}

fn quantize(c: f64) -> u8 {
    (c * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes the cloud's positions, colors, normals, grid and viewpoint.
pub fn write_ply(cloud: &PointCloud, path: &Path, opts: PlyOptions) -> Result<()> {
    let colors: Vec<[u8; 3]> = cloud.colors().iter().map(|c| c.map(quantize)).collect();
    write_vertices(cloud, &colors, path, opts)
}

/// Deterministic color for a segment label; distinct labels below 2^24 get
/// distinct colors.
pub fn label_color(label: usize) -> [u8; 3] {
    const MASK: u32 = 0x00FF_FFFF;
    // bijection on 24 bits: odd multiply and xorshift are both invertible
    let mut x = (label as u32) & MASK;
    x = x.wrapping_mul(0x9E_3779) & MASK;
    x ^= x >> 12;
    x = x.wrapping_mul(0x5B_D1E5) & MASK;
    x ^= x >> 11;
    [(x >> 16) as u8, (x >> 8) as u8, x as u8]
}

/// Writes the cloud with each point colored by its segment label.
pub fn write_segmented_ply(cloud: &PointCloud, seg: &Segmentation, path: &Path) -> Result<()> {
    if seg.labels().len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation covers {} points, cloud has {}",
            seg.labels().len(),
            cloud.len()
        )));
    }
    let colors: Vec<[u8; 3]> = seg.labels().iter().map(|&l| label_color(l)).collect();
    write_vertices(cloud, &colors, path, PlyOptions::default())
}

fn write_vertices(cloud: &PointCloud, colors: &[[u8; 3]], path: &Path, opts: PlyOptions) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_body(cloud, colors, &mut w, opts).map_err(|e| Error::io(path, e))
}

fn write_body<W: Write>(
    cloud: &PointCloud,
    colors: &[[u8; 3]],
    w: &mut W,
    opts: PlyOptions,
) -> std::io::Result<()> {
    let pos_ty = match opts.precision {
        PlyPrecision::F32 => "float",
        PlyPrecision::F64 => "double",
    };
    writeln!(w, "ply")?;
    match opts.encoding {
        PlyEncoding::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyEncoding::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    if let Some(grid) = cloud.grid() {
        writeln!(w, "comment grid {} {}", grid.width(), grid.height())?;
    }
    if let Some(vp) = cloud.viewpoint() {
        writeln!(w, "comment viewpoint {} {} {}", vp[0], vp[1], vp[2])?;
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property {pos_ty} {axis}")?;
    }
    for ch in ["red", "green", "blue"] {
        writeln!(w, "property uchar {ch}")?;
    }
    let normals = cloud.normals();
    if normals.is_some() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(w, "property float {axis}")?;
        }
    }
    let grid = cloud.grid();
    if grid.is_some() {
        writeln!(w, "property int row")?;
        writeln!(w, "property int col")?;
    }
    writeln!(w, "end_header")?;

    for (i, p) in cloud.positions().iter().enumerate() {
        let c = colors[i];
        let n = normals.map(|ns| ns[i]);
        let px = grid.map(|g| g.pixel_of(i));
        match opts.encoding {
            PlyEncoding::Ascii => {
                match opts.precision {
                    PlyPrecision::F32 => write!(w, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?,
                    PlyPrecision::F64 => write!(w, "{} {} {}", p[0], p[1], p[2])?,
                }
                write!(w, " {} {} {}", c[0], c[1], c[2])?;
                if let Some(n) = n {
                    write!(w, " {} {} {}", n[0] as f32, n[1] as f32, n[2] as f32)?;
                }
                if let Some((r, col)) = px {
                    write!(w, " {r} {col}")?;
                }
                writeln!(w)?;
            }
            PlyEncoding::BinaryLittleEndian => {
                for v in p {
                    match opts.precision {
                        PlyPrecision::F32 => w.write_all(&(*v as f32).to_le_bytes())?,
                        PlyPrecision::F64 => w.write_all(&v.to_le_bytes())?,
                    }
                }
                w.write_all(&c)?;
                if let Some(n) = n {
                    for v in n {
                        w.write_all(&(v as f32).to_le_bytes())?;
                    }
                }
                if let Some((r, col)) = px {
                    w.write_all(&(r as i32).to_le_bytes())?;
                    w.write_all(&(col as i32).to_le_bytes())?;
                }
            }
        }
    }
    w.flush()
}
