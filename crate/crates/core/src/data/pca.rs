use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal axes of a feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal rows, by non-increasing variance; first nonzero entry positive.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as rows.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    let scale: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Top-`k` principal components (sample covariance, `N − 1` normalization).
pub fn pca_fit(features: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidInput("PCA needs at least 2 samples".into()));
    }
    let d = features[0].len();
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!(
            "PCA rank {k} outside 1..={d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in features {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for row in features {
        for i in 0..d {
            let xi = row[i] - mean[i];
            for j in i..d {
                cov[i][j] += xi * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (values, vectors) = jacobi_eigen(&cov);
    let components = vectors
        .into_iter()
        .take(k)
        .map(|mut c| {
            if c.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0) {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        variances: values.into_iter().take(k).map(|v| v.max(0.0)).collect(),
    })
}

/// Projects centered rows onto the components.
pub fn pca_transform(model: &PcaModel, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    features
        .iter()
        .map(|row| {
            if row.len() != model.mean.len() {
                return Err(Error::DimensionMismatch {
                    expected: model.mean.len(),
                    found: row.len(),
                });
            }
            Ok(model
                .components
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(row.iter().zip(&model.mean))
                        .map(|(ci, (x, m))| ci * (x - m))
                        .sum()
                })
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn line_gives_parallel_component() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let m = pca_fit(&pts, 1).unwrap();
        let dir = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
        assert!(dot(&m.components[0], &dir).abs() >= 1.0 - 1e-8);
        assert!(m.components[0][0] > 0.0);
    }

    #[test]
    fn random_matrix_against_nalgebra() {
        let mut rng = rng_from_seed(7);
        let x: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = pca_fit(&x, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = (i == j) as u8 as f64;
                assert!((dot(&m.components[i], &m.components[j]) - want).abs() < 1e-8);
            }
        }
        assert!(m.variances.windows(2).all(|w| w[0] >= w[1]));
        let proj = pca_transform(&m, &x).unwrap();
        for a in 0..5 {
            let var: f64 = proj.iter().map(|r| r[a] * r[a]).sum::<f64>() / 9.0;
            assert!((var - m.variances[a]).abs() < 1e-8);
        }
        // Independent oracle: nalgebra's symmetric eigen-solver.
        let mean: Vec<f64> = (0..5).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / 10.0).collect();
        let c = nalgebra::DMatrix::from_fn(5, 5, |i, j| {
            x.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / 9.0
        });
        let mut ev: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ev.iter().zip(&m.variances) {
            assert!((a - b).abs() < 1e-8);
        }
        // Full rank reconstructs exactly.
        for (r, p) in x.iter().zip(&proj) {
            for j in 0..5 {
                let back: f64 = mean[j] + (0..5).map(|a| p[a] * m.components[a][j]).sum::<f64>();
                assert!((back - r[j]).abs() < 1e-8);
            }
        }
        assert!(pca_fit(&x, 6).is_err());
    }
}
