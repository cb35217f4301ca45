//! Binary descriptor cache: an 8-byte magic, then little-endian `n: u64`,
//! `k: u64`, `kind: u8`, followed by raw `f64` values (3 per point for
//! normals, 33 for FPFH).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PCLVDESC";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    Normals,
    Fpfh,
}

impl DescriptorKind {
    fn code(self) -> u8 {
        match self {
            DescriptorKind::Normals => 1,
            DescriptorKind::Fpfh => 2,
        }
    }
}

pub fn save_cache(path: &Path, kind: DescriptorKind, k: usize, n: usize, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(25 + values.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    bytes.extend_from_slice(&(k as u64).to_le_bytes());
    bytes.push(kind.code());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

/// Returns the cached values when the file exists and its header matches
/// `(kind, k, n)`; `None` otherwise.
pub fn load_cache(path: &Path, kind: DescriptorKind, k: usize, n: usize, per_point: usize) -> Option<Vec<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).ok()?.read_to_end(&mut bytes).ok()?;
    if bytes.len() < 25 || &bytes[..8] != MAGIC {
        return None;
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    if read_u64(8) != n as u64 || read_u64(16) != k as u64 || bytes[24] != kind.code() {
        return None;
    }
    let body = &bytes[25..];
    if body.len() != n * per_point * 8 {
        return None;
    }
    Some(
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}
