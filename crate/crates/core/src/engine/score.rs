use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 / (1 + ||a - b||)`, in `(0, 1]`.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(sim(a, b))
}

pub(crate) fn sim(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    1.0 / (1.0 + d2.sqrt())
}

/// Filter similarity against the nearest probe.
pub(crate) fn probe_sim(f: &[f64], probes: &[Vec<f64>]) -> f64 {
    probes.iter().map(|p| sim(f, p)).fold(0.0, f64::max)
}

pub fn combined_score(lambda: f64, vector_sim: f64, filter_sim: f64) -> f64 {
    lambda * vector_sim + (1.0 - lambda) * filter_sim
}

/// Candidate retrieval size `clamp(ceil(c * (k / lambda) / alpha^2), k, n)`.
pub fn compute_k_prime(k: usize, lambda: f64, alpha: f64, c: f64, n: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if lambda == 0.0 {
        return Err(Error::InvalidParameter(
            "lambda = 0 is filter-only scoring; use prefilter search".into(),
        ));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be in (0, 1] (got {lambda})"
        )));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::AlphaTooSmall(alpha));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be positive (got {c})")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let raw = (c * (k as f64 / lambda) * (1.0 / (alpha * alpha))).ceil();
    let raw = if raw >= n as f64 { n } else { raw as usize };
    Ok(raw.max(k).min(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub id: u32,
    pub vector_sim: f64,
    pub filter_sim: f64,
    pub score: f64,
}

/// Descending score, then ascending id.
pub(crate) fn by_score_then_id(a: &ScoredHit, b: &ScoredHit) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    pub k: usize,
    pub lambda: f64,
    pub c: f64,
    pub probes: usize,
    pub ef_search: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            k: 10,
            lambda: 0.5,
            c: 4.0,
            probes: 1,
            ef_search: crate::index::hnsw::DEFAULT_EF_SEARCH,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.probes == 0 {
            return Err(Error::InvalidParameter("probes must be >= 1".into()));
        }
        // Shares the lambda/c checks.
        compute_k_prime(self.k, self.lambda, 1.0, self.c, 1).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_prime_examples() {
        assert_eq!(compute_k_prime(10, 1.0, 1.0, 1.0, 1000).unwrap(), 10);
        assert_eq!(compute_k_prime(10, 0.5, 1.0, 2.0, 1000).unwrap(), 40);
        assert_eq!(compute_k_prime(10, 0.1, 2.0, 1.0, 20).unwrap(), 20);
        assert_eq!(compute_k_prime(10, 0.1, 2.0, 1.0, 1000).unwrap(), 25);
        // Large alpha would drop below k.
        assert_eq!(compute_k_prime(10, 1.0, 10.0, 1.0, 1000).unwrap(), 10);
        assert_eq!(compute_k_prime(10, 1.0, 1.0, 1.0, 3).unwrap(), 3);
    }

    #[test]
    fn k_prime_errors() {
        assert!(compute_k_prime(10, 0.0, 1.0, 1.0, 10).is_err());
        assert!(compute_k_prime(10, 1.5, 1.0, 1.0, 10).is_err());
        assert!(compute_k_prime(0, 0.5, 1.0, 1.0, 10).is_err());
        assert!(compute_k_prime(10, 0.5, 0.5, 1.0, 10).is_err());
        assert!(compute_k_prime(10, 0.5, 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn similarity_values() {
        assert_eq!(similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(similarity(&[0.0, 0.0], &[0.6, 0.8]).unwrap(), 0.5);
        assert!(similarity(&[0.0], &[0.0, 1.0]).is_err());
        assert_eq!(combined_score(0.5, 1.0, 1.0), 1.0);
    }
}
