//! Big-endian IDX containers (the MNIST distribution format).
//!
//! Files may be gzip-compressed; compression is detected from the leading
//! bytes rather than the file name.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses an in-memory IDX image file; pixels are scaled by `1/255`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<GrayImage>> {
    if be_u32(bytes, 0) != Some(IMAGE_MAGIC) {
        return Err(Error::Format("not an IDX image file".into()));
    }
    let header = |at| be_u32(bytes, at).ok_or_else(|| Error::Format("truncated IDX image header".into()));
    let count = header(4)? as usize;
    let rows = header(8)? as usize;
    let cols = header(12)? as usize;
    if count > 0 && (rows == 0 || cols == 0) {
        return Err(Error::Format(format!("IDX image dimensions {rows}x{cols}")));
    }
    let payload = &bytes[16..];
    let size = rows * cols;
    (0..count)
        .map(|i| {
            let chunk = payload
                .get(i * size..(i + 1) * size)
                .ok_or_else(|| Error::Format(format!("short read at image {i}")))?;
            let pixels = chunk.iter().map(|&b| b as f64 / 255.0).collect();
            Ok(GrayImage::from_vec_unchecked(rows, cols, pixels))
        })
        .collect()
}

/// Parses an in-memory IDX label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    if be_u32(bytes, 0) != Some(LABEL_MAGIC) {
        return Err(Error::Format("not an IDX label file".into()));
    }
    let count = be_u32(bytes, 4).ok_or_else(|| Error::Format("truncated IDX label header".into()))? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Format(format!("short read at label {}", payload.len())));
    }
    Ok(payload[..count].iter().map(|&b| b as usize).collect())
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Vec<GrayImage>> {
    let path = path.as_ref();
    parse_idx_images(&load_bytes(path)?).map_err(|e| annotate(e, path))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    parse_idx_labels(&load_bytes(path)?).map_err(|e| annotate(e, path))
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// Encodes images as an uncompressed IDX image file, quantizing each pixel
/// to `round(255 v)` after clamping to `[0, 1]`.
pub fn encode_idx_images(images: &[GrayImage]) -> Result<Vec<u8>> {
    let (rows, cols) = images.first().map(GrayImage::shape).unwrap_or((0, 0));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: img.rows(),
                cols: img.cols(),
                file: None,
            });
        }
        out.extend(img.pixels().iter().map(|&v| quantize(v)));
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        let byte = u8::try_from(l).map_err(|_| Error::Format(format!("label {l} does not fit a byte")))?;
        out.push(byte);
    }
    Ok(out)
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}
