//! Per-dimension z-score normalization of vectors and filter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor applied to per-dimension standard deviations.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Per-dimension mean and standard deviation for vectors and filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub vector_mean: Vec<f64>,
    pub vector_std: Vec<f64>,
    pub filter_mean: Vec<f64>,
    pub filter_std: Vec<f64>,
    pub epsilon: f64,
}

fn column_stats(data: &[f32], dim: usize, epsilon: f64) -> (Vec<f64>, Vec<f64>) {
    let n = data.len() / dim;
    let mut mean = vec![0.0f64; dim];
    for row in data.chunks_exact(dim) {
        for (acc, &x) in mean.iter_mut().zip(row) {
            *acc += x as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0f64; dim];
    for row in data.chunks_exact(dim) {
        for ((acc, &x), &mu) in var.iter_mut().zip(row).zip(&mean) {
            let dx = x as f64 - mu;
            *acc += dx * dx;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s < epsilon {
                epsilon
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

fn check_finite(data: &[f32], dim: usize) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(pos) => Err(Error::NonFinite {
            row: pos / dim,
            dim: pos % dim,
        }),
        None => Ok(()),
    }
}

/// Fits per-dimension statistics over row-major `vectors` (n x `d`) and
/// `filters` (n x `m`).
pub fn fit_normalizer(
    vectors: &[f32],
    d: usize,
    filters: &[f32],
    m: usize,
    epsilon: f64,
) -> Result<NormStats> {
    if d == 0 || m == 0 {
        return Err(Error::InvalidParameter("dimensions must be positive".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive (got {epsilon})"
        )));
    }
    if vectors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if vectors.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: vectors.len() % d,
        });
    }
    let n = vectors.len() / d;
    if filters.len() != n * m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            actual: filters.len(),
        });
    }
    check_finite(vectors, d)?;
    check_finite(filters, m)?;

    let (vector_mean, vector_std) = column_stats(vectors, d, epsilon);
    let (filter_mean, filter_std) = column_stats(filters, m, epsilon);
    Ok(NormStats {
        vector_mean,
        vector_std,
        filter_mean,
        filter_std,
        epsilon,
    })
}

impl NormStats {
    pub fn vector_dim(&self) -> usize {
        self.vector_mean.len()
    }

    pub fn filter_dim(&self) -> usize {
        self.filter_mean.len()
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.vector_std.len() != self.vector_mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vector_mean.len(),
                actual: self.vector_std.len(),
            });
        }
        if self.filter_std.len() != self.filter_mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.filter_mean.len(),
                actual: self.filter_std.len(),
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Malformed("epsilon must be positive".into()));
        }
        let floor_ok = self
            .vector_std
            .iter()
            .chain(&self.filter_std)
            .all(|&s| s >= self.epsilon);
        if !floor_ok {
            return Err(Error::Malformed("std below epsilon floor".into()));
        }
        Ok(())
    }

    pub fn normalize_vector<T: Copy + Into<f64>>(&self, v: &[T]) -> Result<Vec<f64>> {
        standardize(v, &self.vector_mean, &self.vector_std)
    }

    pub fn normalize_filter<T: Copy + Into<f64>>(&self, f: &[T]) -> Result<Vec<f64>> {
        standardize(f, &self.filter_mean, &self.filter_std)
    }

    /// Inverse of [`NormStats::normalize_vector`].
    pub fn denormalize_vector(&self, z: &[f64]) -> Result<Vec<f64>> {
        unstandardize(z, &self.vector_mean, &self.vector_std)
    }

    /// Inverse of [`NormStats::normalize_filter`].
    pub fn denormalize_filter(&self, z: &[f64]) -> Result<Vec<f64>> {
        unstandardize(z, &self.filter_mean, &self.filter_std)
    }
}

/// Normalizes one (vector, filter) pair.
pub fn apply_normalizer<T: Copy + Into<f64>>(
    stats: &NormStats,
    v: &[T],
    f: &[T],
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((stats.normalize_vector(v)?, stats.normalize_filter(f)?))
}

fn standardize<T: Copy + Into<f64>>(x: &[T], mean: &[f64], std: &[f64]) -> Result<Vec<f64>> {
    if x.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            actual: x.len(),
        });
    }
    Ok(x.iter()
        .zip(mean.iter().zip(std))
        .map(|(&x, (&mu, &s))| (x.into() - mu) / s)
        .collect())
}

fn unstandardize(z: &[f64], mean: &[f64], std: &[f64]) -> Result<Vec<f64>> {
    if z.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            actual: z.len(),
        });
    }
    Ok(z.iter()
        .zip(mean.iter().zip(std))
        .map(|(&z, (&mu, &s))| z * s + mu)
        .collect())
}
