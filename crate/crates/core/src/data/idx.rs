use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx {
            offset,
            message: "truncated header".into(),
        })
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let got = be_u32(bytes, 0)?;
    if got != want {
        return Err(Error::Idx {
            offset: 0,
            message: format!("unexpected magic 0x{got:08x}, expected 0x{want:08x}"),
        });
    }
    Ok(())
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    bytes.get(start..start + len).ok_or_else(|| Error::Idx {
        offset: bytes.len(),
        message: format!("truncated payload: need {len} bytes from offset {start}"),
    })
}

/// Parses IDX image and label buffers, keeping rows whose label is in `keep`
/// (`keep[0]` becomes class 0, `keep[1]` class 1). Pixels are scaled to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8], keep: [u8; 2]) -> Result<(Dataset, usize, usize)> {
    check_magic(images, IMAGES_MAGIC)?;
    check_magic(labels, LABELS_MAGIC)?;
    let n = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let n_labels = be_u32(labels, 4)? as usize;
    if n != n_labels {
        return Err(Error::Idx {
            offset: 4,
            message: format!("{n} images but {n_labels} labels"),
        });
    }
    let px = payload(images, 16, n * rows * cols)?;
    let lb = payload(labels, 8, n)?;
    let mut features = Vec::new();
    let mut out_labels = Vec::new();
    for (i, &l) in lb.iter().enumerate() {
        let y = match keep.iter().position(|&k| k == l) {
            Some(p) => p == 1,
            None => continue,
        };
        let img = &px[i * rows * cols..(i + 1) * rows * cols];
        features.push(img.iter().map(|&p| p as f64 / 255.0).collect());
        out_labels.push(y);
    }
    Ok((
        Dataset::new(features, out_labels, format!("idx {rows}x{cols}"))?,
        rows,
        cols,
    ))
}

/// Reads IDX files from disk; returns the dataset and the image height and width.
pub fn load_idx(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    keep: [u8; 2],
) -> Result<(Dataset, usize, usize)> {
    let (mut d, h, w) = parse_idx(&std::fs::read(&images)?, &std::fs::read(&labels)?, keep)?;
    d.meta = format!("{} ({h}x{w})", images.as_ref().display());
    Ok((d, h, w))
}
