//! Datasets and preprocessing.
//!
//! The bundled set holds 8×8 grayscale digits of classes 0 and 1 (pixel
//! values 0–16). IDX files, bilinear resizing, PCA and min-max scaling cover
//! the full-size image and 2D-feature pipelines.

mod idx;
mod pca;

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub use idx::{load_idx, parse_idx};
pub use pca::{jacobi_eigen, pca_fit, pca_transform, PcaModel};

const DIGITS01: &str = include_str!("../../data/digits01.csv");

/// Binary-labelled feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub meta: String,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<bool>, meta: impl Into<String>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        if let Some(d) = features.first().map(Vec::len) {
            if let Some(i) = features.iter().position(|r| r.len() != d) {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} features, expected {d}",
                    features[i].len()
                )));
            }
        }
        Ok(Dataset {
            features,
            labels,
            meta: meta.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Rows with label `y`.
    pub fn class(&self, y: bool) -> Dataset {
        self.select(&self.indices_of(y), &format!("{} [class {}]", self.meta, y as u8))
    }

    fn indices_of(&self, y: bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == y).collect()
    }

    fn select(&self, idx: &[usize], meta: &str) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: meta.to_string(),
        }
    }

    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Dataset> {
        Dataset::new(features, self.labels.clone(), self.meta.clone())
    }
}

/// Parses `label,f0,f1,...` text; labels must be 0 or 1.
pub fn parse_csv(text: &str, source: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(&e, 0))?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(Error::Csv {
            row: 0,
            column: 0,
            message: "header must be label,f0,f1,...".into(),
        });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(&e, row))?;
        if rec.len() != header.len() {
            return Err(Error::Csv {
                row,
                column: rec.len(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        labels.push(match &rec[0] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Csv {
                    row,
                    column: 0,
                    message: format!("label {other:?} is not 0 or 1"),
                })
            }
        });
        let mut x = Vec::with_capacity(rec.len() - 1);
        for (c, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                row,
                column: c,
                message: format!("{field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    column: c,
                    message: "non-finite value".into(),
                });
            }
            x.push(v);
        }
        features.push(x);
    }
    if labels.is_empty() {
        return Err(Error::Csv {
            row: 0,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Dataset::new(features, labels, source)
}

fn csv_error(e: &csv::Error, row: usize) -> Error {
    Error::Csv {
        row,
        column: 0,
        message: e.to_string(),
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, &path.display().to_string())
}

/// The bundled 8×8 digits of classes 0 and 1.
pub fn bundled_digits() -> Dataset {
    parse_csv(DIGITS01, "bundled digits01.csv").expect("bundled data parses")
}

/// Bilinear resize of a row-major `h×w` image, corners aligned, clamped to `[0, 1]`.
pub fn resize_bilinear(img: &[f64], h: usize, w: usize, th: usize, tw: usize) -> Result<Vec<f64>> {
    if h < 2 || w < 2 || th < 2 || tw < 2 {
        return Err(Error::InvalidInput(format!(
            "degenerate resize {h}x{w} -> {th}x{tw}"
        )));
    }
    if img.len() != h * w {
        return Err(Error::DimensionMismatch {
            expected: h * w,
            found: img.len(),
        });
    }
    let axis = |i: usize, from: usize, to: usize| {
        let s = i as f64 * (from - 1) as f64 / (to - 1) as f64;
        let i0 = (s.floor() as usize).min(from - 2);
        (i0, s - i0 as f64)
    };
    let mut out = Vec::with_capacity(th * tw);
    for r in 0..th {
        let (r0, fr) = axis(r, h, th);
        for c in 0..tw {
            let (c0, fc) = axis(c, w, tw);
            let p = |rr: usize, cc: usize| img[rr * w + cc];
            let top = p(r0, c0) * (1.0 - fc) + p(r0, c0 + 1) * fc;
            let bot = p(r0 + 1, c0) * (1.0 - fc) + p(r0 + 1, c0 + 1) * fc;
            out.push((top * (1.0 - fr) + bot * fr).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// Column-wise affine map fitted on one matrix and reusable on others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl MinMax {
    pub fn fit(features: &[Vec<f64>], lo: f64, hi: f64) -> Result<Self> {
        let d = features
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("empty feature matrix".into()))?;
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in features {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(MinMax { min, max, lo, hi })
    }

    /// Constant columns map to the midpoint; values outside the fitted range are clamped.
    pub fn apply(&self, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let span = self.max[j] - self.min[j];
                        if span > 0.0 {
                            let t = ((v - self.min[j]) / span).clamp(0.0, 1.0);
                            (self.lo + t * (self.hi - self.lo)).clamp(self.lo, self.hi)
                        } else {
                            0.5 * (self.lo + self.hi)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Column-wise min-max scaling onto `[lo, hi]`.
pub fn normalize_minmax(features: &[Vec<f64>], lo: f64, hi: f64) -> Result<Vec<Vec<f64>>> {
    Ok(MinMax::fit(features, lo, hi)?.apply(features))
}

/// Label-stratified shuffle split; `ratio` of each class goes to the training set.
pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for y in [false, true] {
        let mut idx = data.indices_of(y);
        if idx.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {} has {} samples, need at least 2",
                y as u8,
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * ratio).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((
        data.select(&train, &format!("{} [train]", data.meta)),
        data.select(&test, &format!("{} [test]", data.meta)),
    ))
}

/// Projects `train` and `test` onto the top-`k` principal axes of `train`,
/// then min-max scales each axis onto `[0, π]` with the training range.
pub fn pca_angles(train: &Dataset, test: &Dataset, k: usize) -> Result<(Dataset, Dataset)> {
    let pca = pca_fit(&train.features, k)?;
    let ztr = pca_transform(&pca, &train.features)?;
    let zte = pca_transform(&pca, &test.features)?;
    let mm = MinMax::fit(&ztr, 0.0, std::f64::consts::PI)?;
    Ok((train.with_features(mm.apply(&ztr))?, test.with_features(mm.apply(&zte))?))
}

/// Two isotropic Gaussian clusters (class 0 at `centers.0`, class 1 at `centers.1`), clamped to `[0, π]²`.
pub fn synth_blobs(
    n_per_class: usize,
    centers: ([f64; 2], [f64; 2]),
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma {sigma} must be >= 0")));
    }
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut features = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let y = i % 2 == 1;
        let c = if y { centers.1 } else { centers.0 };
        features.push(
            c.iter()
                .map(|&m| (m + noise.sample(&mut rng)).clamp(0.0, std::f64::consts::PI))
                .collect(),
        );
        labels.push(y);
    }
    Dataset::new(features, labels, format!("synth_blobs(sigma={sigma}, seed={seed})"))
}
