//! `fvecs` / `bvecs` files: per row an `i32` little-endian dimension, then
//! that many `f32` (fvecs) or `u8` (bvecs) components.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major vectors of a single dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl VectorFile {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> Option<&[f32]> {
        self.data.get(i * self.dim..(i + 1) * self.dim)
    }
}

fn parse(bytes: &[u8], width: usize, what: &str, read: impl Fn(&[u8]) -> f32) -> Result<VectorFile> {
    if bytes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut dim = None;
    let mut data = Vec::new();
    let mut at = 0;
    let mut row = 0;
    while at < bytes.len() {
        let Some(head) = bytes.get(at..at + 4) else {
            return Err(Error::Truncated(format!("{what} row {row} header")));
        };
        let d = i32::from_le_bytes(head.try_into().expect("4 bytes"));
        if d <= 0 {
            return Err(Error::Malformed(format!("{what} row {row} declares dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::Malformed(format!(
                    "{what} row {row} has dimension {d}, expected {expected}"
                )))
            }
            _ => {}
        }
        at += 4;
        let body = bytes
            .get(at..at + d * width)
            .ok_or_else(|| Error::Truncated(format!("{what} row {row}")))?;
        data.extend(body.chunks_exact(width).map(&read));
        at += d * width;
        row += 1;
    }
    Ok(VectorFile {
        dim: dim.expect("at least one row"),
        data,
    })
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<VectorFile> {
    parse(bytes, 4, "fvecs", |c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
}

pub fn parse_bvecs(bytes: &[u8]) -> Result<VectorFile> {
    parse(bytes, 1, "bvecs", |c| c[0] as f32)
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<VectorFile> {
    parse_fvecs(&fs::read(path)?)
}

pub fn load_bvecs(path: impl AsRef<Path>) -> Result<VectorFile> {
    parse_bvecs(&fs::read(path)?)
}

pub fn encode_fvecs(dim: usize, data: &[f32]) -> Result<Vec<u8>> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: data.len(),
        });
    }
    let d = i32::try_from(dim).map_err(|_| Error::InvalidParameter("dimension too large".into()))?;
    let mut out = Vec::with_capacity(data.len() * 4 + data.len() / dim * 4);
    for row in data.chunks_exact(dim) {
        out.write_all(&d.to_le_bytes())?;
        for x in row {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(out)
}

pub fn save_fvecs(path: impl AsRef<Path>, dim: usize, data: &[f32]) -> Result<()> {
    fs::write(path, encode_fvecs(dim, data)?)?;
    Ok(())
}
