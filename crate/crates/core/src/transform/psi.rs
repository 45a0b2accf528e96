//! The filter-centric transformation family and its configuration.
//!
//! Every variant subtracts a scaled filter offset from the (normalized)
//! vector. The partition and cluster variants tile an m-dimensional offset
//! across the d*/m segments of a zero-padded vector; the embedding variant
//! projects the filter through a d x m matrix instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Partition,
    Cluster,
    Embedding,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::Partition => 1,
            Variant::Cluster => 2,
            Variant::Embedding => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Variant::Partition),
            2 => Some(Variant::Cluster),
            3 => Some(Variant::Embedding),
            _ => None,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partition" => Ok(Variant::Partition),
            "cluster" => Ok(Variant::Cluster),
            "embedding" => Ok(Variant::Embedding),
            other => Err(Error::InvalidParameter(format!("unknown variant `{other}`"))),
        }
    }
}

/// Row-major d x m projection matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Projection {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Projection { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Projection {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Gaussian entries scaled by 1/sqrt(cols).
    pub fn seeded_gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Projection { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: f.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(f).map(|(w, x)| w * x).sum())
            .collect())
    }
}

/// Smallest multiple of `m` that is >= `d`.
pub fn padded_dim(d: usize, m: usize) -> usize {
    d.div_ceil(m) * m
}

/// Zero-pads `v` to length `target`.
pub fn pad(v: &[f64], target: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(target.max(v.len()));
    out.extend_from_slice(v);
    out.resize(target.max(v.len()), 0.0);
    out
}

/// Segment-wise `v^(j) - alpha * f` over every m-sized segment of `v`.
pub fn psi_partition(v: &[f64], f: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if f.is_empty() || v.len() % f.len() != 0 {
        return Err(Error::DimensionMismatch {
            expected: padded_dim(v.len(), f.len().max(1)),
            actual: v.len(),
        });
    }
    let m = f.len();
    Ok(v.iter()
        .enumerate()
        .map(|(j, &x)| x - alpha * f[j % m])
        .collect())
}

/// Index of the center nearest to `f`; ties resolve to the lowest index.
pub fn nearest_center(f: &[f64], centers: &[Vec<f64>]) -> Result<usize> {
    if centers.is_empty() {
        return Err(Error::InvalidParameter("empty center list".into()));
    }
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        if c.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                actual: c.len(),
            });
        }
        let d2: f64 = c.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    Ok(best.0)
}

/// Partition transform using the filter's nearest cluster center.
pub fn psi_cluster(v: &[f64], f: &[f64], alpha: f64, centers: &[Vec<f64>]) -> Result<Vec<f64>> {
    let j = nearest_center(f, centers)?;
    psi_partition(v, &centers[j], alpha)
}

/// `v - alpha * W f` with `W` of shape d x m.
pub fn psi_embedding(v: &[f64], f: &[f64], alpha: f64, w: &Projection) -> Result<Vec<f64>> {
    if w.rows != v.len() {
        return Err(Error::DimensionMismatch {
            expected: w.rows,
            actual: v.len(),
        });
    }
    let wf = w.apply(f)?;
    Ok(v.iter().zip(&wf).map(|(x, p)| x - alpha * p).collect())
}

/// Everything needed to evaluate the transform for one index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub original_dim: usize,
    pub filter_dim: usize,
    pub padded_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_centers: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
    pub rng_seed: u64,
}

impl TransformConfig {
    pub fn partition(d: usize, m: usize, alpha: f64) -> Result<Self> {
        let cfg = TransformConfig {
            variant: Variant::Partition,
            alpha,
            original_dim: d,
            filter_dim: m,
            padded_dim: padded_dim(d, m.max(1)),
            cluster_centers: None,
            projection: None,
            rng_seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cluster(d: usize, m: usize, alpha: f64, centers: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let cfg = TransformConfig {
            variant: Variant::Cluster,
            cluster_centers: Some(centers),
            rng_seed: seed,
            ..TransformConfig::partition_unchecked(d, m, alpha)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn embedding(d: usize, m: usize, alpha: f64, w: Projection) -> Result<Self> {
        let cfg = TransformConfig {
            variant: Variant::Embedding,
            padded_dim: d,
            projection: Some(w),
            ..TransformConfig::partition_unchecked(d, m, alpha)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Embedding variant with a seeded Gaussian projection.
    pub fn embedding_seeded(d: usize, m: usize, alpha: f64, seed: u64) -> Result<Self> {
        let mut cfg = TransformConfig::embedding(d, m, alpha, Projection::seeded_gaussian(d, m, seed))?;
        cfg.rng_seed = seed;
        Ok(cfg)
    }

    fn partition_unchecked(d: usize, m: usize, alpha: f64) -> Self {
        TransformConfig {
            variant: Variant::Partition,
            alpha,
            original_dim: d,
            filter_dim: m,
            padded_dim: padded_dim(d, m.max(1)),
            cluster_centers: None,
            projection: None,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(Error::AlphaTooSmall(self.alpha));
        }
        if self.original_dim == 0 || self.filter_dim == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        match self.variant {
            Variant::Partition | Variant::Cluster => {
                if self.padded_dim % self.filter_dim != 0
                    || self.padded_dim != padded_dim(self.original_dim, self.filter_dim)
                {
                    return Err(Error::InvalidParameter(format!(
                        "padded_dim {} is not the smallest multiple of {} >= {}",
                        self.padded_dim, self.filter_dim, self.original_dim
                    )));
                }
            }
            Variant::Embedding => {
                if self.padded_dim != self.original_dim {
                    return Err(Error::InvalidParameter(
                        "embedding variant does not pad".into(),
                    ));
                }
            }
        }
        match self.variant {
            Variant::Cluster => {
                let centers = self.cluster_centers.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("cluster variant requires centers".into())
                })?;
                if centers.is_empty() {
                    return Err(Error::InvalidParameter("empty center list".into()));
                }
                if let Some(c) = centers.iter().find(|c| c.len() != self.filter_dim) {
                    return Err(Error::DimensionMismatch {
                        expected: self.filter_dim,
                        actual: c.len(),
                    });
                }
            }
            Variant::Embedding => {
                let w = self.projection.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("embedding variant requires a projection".into())
                })?;
                if w.rows != self.original_dim || w.cols != self.filter_dim {
                    return Err(Error::InvalidParameter(format!(
                        "projection shape {}x{} does not match {}x{}",
                        w.rows, w.cols, self.original_dim, self.filter_dim
                    )));
                }
            }
            Variant::Partition => {}
        }
        Ok(())
    }

    /// Dimension of transformed vectors.
    pub fn output_dim(&self) -> usize {
        self.padded_dim
    }

    /// The additive offset `psi(v, f) - pad(v)`, i.e. `-alpha * f` tiled,
    /// `-alpha * mu_j` tiled, or `-alpha * W f`.
    pub fn offset(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.filter_dim {
            return Err(Error::DimensionMismatch {
                expected: self.filter_dim,
                actual: f.len(),
            });
        }
        let zero = vec![0.0; self.padded_dim];
        // psi of the zero vector is exactly the offset, and v + offset is
        // bitwise equal to psi(v, f) because x - y == x + (-y) in IEEE-754.
        self.apply(&zero, f)
    }

    /// Full transform of an (already normalized) vector.
    pub fn apply(&self, v: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        match self.variant {
            Variant::Partition => psi_partition(&self.pad(v)?, f, self.alpha),
            Variant::Cluster => psi_cluster(
                &self.pad(v)?,
                f,
                self.alpha,
                self.cluster_centers.as_deref().unwrap_or(&[]),
            ),
            Variant::Embedding => match &self.projection {
                Some(w) => psi_embedding(v, f, self.alpha, w),
                None => Err(Error::InvalidParameter(
                    "embedding variant requires a projection".into(),
                )),
            },
        }
    }

    fn pad(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.original_dim && v.len() != self.padded_dim {
            return Err(Error::DimensionMismatch {
                expected: self.original_dim,
                actual: v.len(),
            });
        }
        Ok(pad(v, self.padded_dim))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: TransformConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Adds a precomputed offset to `v`; slots beyond `v.len()` (padding) keep
/// the bare offset.
pub fn add_offset(v: &[f64], offset: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = offset.to_vec();
    for (o, &x) in out.iter_mut().zip(v) {
        *o = x + *o;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_example() {
        let out = psi_partition(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(out, vec![0.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn zero_filter_is_identity() {
        let v = [0.5, -1.25, 3.0, 9.0, 1.0, 2.0];
        for alpha in [1.0, 2.5, 17.0] {
            assert_eq!(psi_partition(&v, &[0.0, 0.0, 0.0], alpha).unwrap(), v.to_vec());
        }
    }

    #[test]
    fn zero_vector_norm() {
        let f = [0.3, -1.2];
        let alpha = 2.0;
        let out = psi_partition(&[0.0; 8], &f, alpha).unwrap();
        let norm2: f64 = out.iter().map(|x| x * x).sum();
        let expected = 4.0 * alpha * alpha * (0.09 + 1.44);
        assert!((norm2 - expected).abs() < 1e-12);
        for seg in out.chunks(2) {
            assert_eq!(seg, &[-0.6, 2.4]);
        }
    }

    #[test]
    fn partition_dimension_mismatch() {
        assert!(psi_partition(&[1.0, 2.0, 3.0], &[1.0, 0.0], 1.0).is_err());
        assert!(psi_partition(&[1.0, 2.0], &[], 1.0).is_err());
    }

    #[test]
    fn cluster_variant() {
        let centers = vec![vec![0.0, 0.0], vec![10.0, 10.0]];
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_center(&[1.0, 1.0], &centers).unwrap(), 0);
        assert_eq!(
            psi_cluster(&v, &[10.0, 10.0], 1.5, &centers).unwrap(),
            psi_partition(&v, &[10.0, 10.0], 1.5).unwrap()
        );
        // Equidistant: lower index wins.
        assert_eq!(nearest_center(&[5.0, 5.0], &centers).unwrap(), 0);
        assert!(psi_cluster(&v, &[1.0, 1.0], 1.0, &[]).is_err());
    }

    #[test]
    fn embedding_variant() {
        let v = [1.0, 2.0, 3.0];
        let f = [0.5, -0.5, 2.0];
        assert_eq!(psi_embedding(&v, &f, 3.0, &Projection::zeros(3, 3)).unwrap(), v.to_vec());
        let mut eye = Projection::zeros(3, 3);
        for i in 0..3 {
            eye.data[i * 3 + i] = 1.0;
        }
        assert_eq!(psi_embedding(&v, &f, 1.0, &eye).unwrap(), vec![0.5, 2.5, 1.0]);
        assert!(psi_embedding(&v, &f, 1.0, &Projection::zeros(2, 3)).is_err());
        assert!(psi_embedding(&v, &f[..2], 1.0, &eye).is_err());
    }

    #[test]
    fn embedding_matches_naive_loop() {
        let (d, m) = (7, 3);
        let w = Projection::seeded_gaussian(d, m, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let alpha = 1.7;
        let out = psi_embedding(&v, &f, alpha, &w).unwrap();
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..m {
                acc += w.data[i * m + k] * f[k];
            }
            let expected = v[i] - alpha * acc;
            assert!((out[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation_and_padding() {
        let cfg = TransformConfig::partition(10, 4, 1.0).unwrap();
        assert_eq!(cfg.padded_dim, 12);
        assert!(matches!(
            TransformConfig::partition(10, 4, 0.5),
            Err(Error::AlphaTooSmall(_))
        ));
        assert!(TransformConfig::cluster(8, 2, 1.0, vec![], 0).is_err());
        assert!(TransformConfig::embedding(8, 2, 1.0, Projection::zeros(8, 3)).is_err());
        let json = TransformConfig::embedding_seeded(8, 2, 2.0, 9).unwrap().to_json();
        let back = TransformConfig::from_json(&json).unwrap();
        assert_eq!(back.projection.unwrap().data.len(), 16);
    }

    #[test]
    fn offset_application_is_bitwise_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let centers = vec![f.iter().map(|x| x * 0.9).collect(), vec![0.0; 4]];
        let configs = [
            TransformConfig::partition(10, 4, 1.3).unwrap(),
            TransformConfig::cluster(10, 4, 2.0, centers, 0).unwrap(),
            TransformConfig::embedding_seeded(10, 4, 1.1, 5).unwrap(),
        ];
        for cfg in &configs {
            let direct = cfg.apply(&v, &f).unwrap();
            let via = add_offset(&v, &cfg.offset(&f).unwrap());
            assert_eq!(direct.len(), cfg.output_dim());
            for (a, b) in direct.iter().zip(&via) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
