//! k-means over filter vectors for the cluster transform variant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 25;
pub const TOLERANCE: f64 = 1e-4;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations (at most
/// [`MAX_ITERATIONS`], or until no center moves more than [`TOLERANCE`]).
/// `filters` is row-major n x `m`.
pub fn fit_filter_clusters(filters: &[f64], m: usize, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 || filters.len() % m != 0 {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: filters.len(),
        });
    }
    let n = filters.len() / m;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of filters ({n})"
        )));
    }
    let points: Vec<&[f64]> = filters.chunks_exact(m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against rounding walking past the last positive weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[next].to_vec();
        for (dist, p) in d2.iter_mut().zip(&points) {
            *dist = dist.min(sq_dist(p, &c));
        }
        centers.push(c);
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..MAX_ITERATIONS {
        for (a, p) in assignment.iter_mut().zip(&points) {
            *a = nearest(p, &centers).0;
        }
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(&points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        let mut max_shift = 0.0f64;
        for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            // An empty cluster keeps its previous center.
            if count == 0 {
                continue;
            }
            let updated: Vec<f64> = sum.into_iter().map(|s| s / count as f64).collect();
            max_shift = max_shift.max(sq_dist(center, &updated).sqrt());
            *center = updated;
        }
        if max_shift < TOLERANCE {
            break;
        }
    }
    Ok(centers)
}
