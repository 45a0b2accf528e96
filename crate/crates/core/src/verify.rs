//! Randomized property suites for the transform's distance guarantees and
//! the retrieval-size formula. Used by the CLI `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::engine::compute_k_prime;
use crate::error::{Error, Result};
use crate::transform::{psi_partition, separation_alpha, Projection, TransformConfig};

pub const PRESERVATION_TOLERANCE: f64 = 1e-9;
pub const EXPANSION_TOLERANCE: f64 = 1e-6;
/// Multiplier on the separation threshold used by the separation suite.
pub const SEPARATION_SAFETY: f64 = 2.0;
const MAX_PADDED_DIM: usize = 128;
const MAX_FILTER_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub trials: usize,
    /// Perturbs one side of every transform; every suite should then fail.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Worst observed deviation, in the suite's own units.
    pub worst: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.trials > 0 && self.failures == 0
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random `(m, d*)` with `m <= 8`, `d* <= 128`, `m | d*`.
fn shape(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let m = rng.random_range(1..=MAX_FILTER_DIM);
    let segments = rng.random_range(1..=MAX_PADDED_DIM / m);
    (m, m * segments)
}

struct Psi {
    fault: bool,
}

impl Psi {
    /// Transform of the "b" side; the fault nudges alpha.
    fn b(&self, v: &[f64], f: &[f64], alpha: f64) -> Vec<f64> {
        let alpha = if self.fault { alpha * (1.0 + 1e-3) + 1e-3 } else { alpha };
        psi_partition(v, f, alpha).expect("shapes agree")
    }

    fn a(&self, v: &[f64], f: &[f64], alpha: f64) -> Vec<f64> {
        psi_partition(v, f, alpha).expect("shapes agree")
    }
}

/// Same filter on both sides: transformed distance equals vector distance.
pub fn preservation_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x01);
    let psi = Psi { fault: opts.inject_fault };
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..opts.trials {
        let (m, dp) = shape(&mut rng);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let va = gaussian(&mut rng, dp, scale);
        let vb = gaussian(&mut rng, dp, scale);
        let f = gaussian(&mut rng, m, 3.0);
        let alpha = rng.random_range(1.0..10.0);
        let original = dist(&va, &vb);
        let transformed = dist(&psi.a(&va, &f, alpha), &psi.b(&vb, &f, alpha));
        let rel = (transformed - original).abs() / original;
        worst = worst.max(rel);
        if !(rel <= PRESERVATION_TOLERANCE) {
            failures += 1;
        }
    }
    SuiteResult {
        name: "distance preservation",
        trials: opts.trials,
        failures,
        worst,
    }
}

/// Squared transformed distance against the closed-form expansion
/// `|dv|^2 + (d*/m) a^2 |df|^2 - 2a sum_j <dv_j, df>`.
pub fn expansion_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x02);
    let psi = Psi { fault: opts.inject_fault };
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..opts.trials {
        let (m, dp) = shape(&mut rng);
        let va = gaussian(&mut rng, dp, 1.0);
        let vb = gaussian(&mut rng, dp, 1.0);
        let fa = gaussian(&mut rng, m, 1.0);
        let fb = gaussian(&mut rng, m, 1.0);
        let alpha = rng.random_range(1.0..10.0);
        let direct = dist(&psi.a(&va, &fa, alpha), &psi.b(&vb, &fb, alpha)).powi(2);
        let dv: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| a - b).collect();
        let df: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a - b).collect();
        let dv2: f64 = dv.iter().map(|x| x * x).sum();
        let df2: f64 = df.iter().map(|x| x * x).sum();
        let cross: f64 = dv
            .chunks_exact(m)
            .map(|seg| seg.iter().zip(&df).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        let formula = dv2 + (dp / m) as f64 * alpha * alpha * df2 - 2.0 * alpha * cross;
        let rel = (direct - formula).abs() / formula.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if !(rel <= EXPANSION_TOLERANCE) {
            failures += 1;
        }
    }
    SuiteResult {
        name: "expansion identity",
        trials: opts.trials,
        failures,
        worst,
    }
}

/// Equal vectors: distance is `sqrt(d*/m) * alpha * |df|`.
pub fn pure_filter_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x03);
    let psi = Psi { fault: opts.inject_fault };
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..opts.trials {
        let (m, dp) = shape(&mut rng);
        let v = gaussian(&mut rng, dp, 1.0);
        let fa = gaussian(&mut rng, m, 1.0);
        let fb = gaussian(&mut rng, m, 1.0);
        let alpha = rng.random_range(1.0..10.0);
        let expected = ((dp / m) as f64).sqrt() * alpha * dist(&fa, &fb);
        let got = dist(&psi.a(&v, &fa, alpha), &psi.b(&v, &fb, alpha));
        let rel = (got - expected).abs() / expected;
        worst = worst.max(rel);
        if !(rel <= EXPANSION_TOLERANCE) {
            failures += 1;
        }
    }
    SuiteResult {
        name: "pure filter distance",
        trials: opts.trials,
        failures,
        worst,
    }
}

/// `psi(v1 + v2, f1 + f2) = psi(v1, f1) + psi(v2, f2)`.
pub fn linearity_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x04);
    let psi = Psi { fault: opts.inject_fault };
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..opts.trials {
        let (m, dp) = shape(&mut rng);
        let (v1, v2) = (gaussian(&mut rng, dp, 1.0), gaussian(&mut rng, dp, 1.0));
        let (f1, f2) = (gaussian(&mut rng, m, 1.0), gaussian(&mut rng, m, 1.0));
        let alpha = rng.random_range(1.0..10.0);
        let vs: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
        let fs: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a + b).collect();
        let lhs = psi.a(&vs, &fs, alpha);
        let p1 = psi.a(&v1, &f1, alpha);
        let p2 = psi.b(&v2, &f2, alpha);
        let rhs: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a + b).collect();
        let rel = dist(&lhs, &rhs) / lhs.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        worst = worst.max(rel);
        if !(rel <= PRESERVATION_TOLERANCE) {
            failures += 1;
        }
    }
    SuiteResult {
        name: "linearity",
        trials: opts.trials,
        failures,
        worst,
    }
}

/// Two filter groups whose vectors share one ball of diameter `D_v` (the
/// worst case) and whose filters are `delta_f` apart, with the condition
/// `(d*/m) delta_f > 2 D_v` met.
#[derive(Debug, Clone)]
pub struct TwoClusters {
    pub m: usize,
    pub padded_dim: usize,
    pub intra_diameter: f64,
    pub filter_gap: f64,
    pub vectors: [Vec<Vec<f64>>; 2],
    pub filters: [Vec<f64>; 2],
}

impl TwoClusters {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let (m, dp) = shape(rng);
        let segments = (dp / m) as f64;
        let diameter = rng.random_range(0.5..5.0);
        let gap = 2.0 * diameter / segments * rng.random_range(1.2..4.0);
        let center = gaussian(rng, dp, 5.0);
        let ball = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..rng.random_range(2..=12))
                .map(|_| {
                    let dir = gaussian(rng, dp, 1.0);
                    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let r = diameter / 2.0 * rng.random::<f64>();
                    center.iter().zip(&dir).map(|(c, u)| c + r * u / norm).collect()
                })
                .collect()
        };
        let vectors = [ball(rng), ball(rng)];
        let fa = gaussian(rng, m, 2.0);
        let dir = gaussian(rng, m, 1.0);
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let fb: Vec<f64> = fa.iter().zip(&dir).map(|(a, u)| a + gap * u / norm).collect();
        TwoClusters {
            m,
            padded_dim: dp,
            intra_diameter: diameter,
            filter_gap: gap,
            vectors,
            filters: [fa, fb],
        }
    }

    /// `(max intra-group, min inter-group)` transformed distances.
    pub fn distances(&self, alpha: f64) -> (f64, f64) {
        let t: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|g| {
                self.vectors[g]
                    .iter()
                    .map(|v| psi_partition(v, &self.filters[g], alpha).expect("shapes agree"))
                    .collect()
            })
            .collect();
        let mut intra = 0.0f64;
        for group in &t {
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    intra = intra.max(dist(a, b));
                }
            }
        }
        let mut inter = f64::INFINITY;
        for a in &t[0] {
            for b in &t[1] {
                inter = inter.min(dist(a, b));
            }
        }
        (intra, inter)
    }

    pub fn alpha_star(&self) -> Result<f64> {
        separation_alpha(self.intra_diameter, self.filter_gap, self.padded_dim, self.m)
    }
}

/// Separation at `2 alpha*`, and a non-decreasing separation ratio over an
/// alpha sweep from `alpha*` to `4 alpha*`.
pub fn separation_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x05);
    let (mut failures, mut worst) = (0, f64::INFINITY);
    for _ in 0..opts.trials {
        let c = TwoClusters::random(&mut rng);
        let Ok(star) = c.alpha_star() else {
            failures += 1;
            continue;
        };
        let mut alpha = SEPARATION_SAFETY * star;
        if opts.inject_fault {
            alpha = 0.0;
        }
        let (intra, inter) = c.distances(alpha);
        worst = worst.min(inter - intra);
        let sweep: Vec<f64> = [1.0, 1.5, 2.0, 3.0, 4.0]
            .iter()
            .map(|s| {
                let (i, e) = c.distances(s * star);
                e / i
            })
            .collect();
        let monotone = sweep.windows(2).all(|w| w[1] >= w[0]);
        if !(inter > intra) || !monotone {
            failures += 1;
        }
    }
    SuiteResult {
        name: "cluster separation",
        trials: opts.trials,
        failures,
        worst,
    }
}

/// Transform offsets cancel for equal filters in every variant.
pub fn variant_cancellation_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x06);
    let (mut failures, mut worst) = (0, 0.0f64);
    for t in 0..opts.trials {
        let m = rng.random_range(1..=MAX_FILTER_DIM);
        let d = rng.random_range(m..=MAX_PADDED_DIM - m);
        let alpha = rng.random_range(1.0..10.0);
        let cfg = match t % 3 {
            0 => TransformConfig::partition(d, m, alpha),
            1 => {
                let centers = (0..3).map(|_| gaussian(&mut rng, m, 2.0)).collect();
                TransformConfig::cluster(d, m, alpha, centers, opts.seed)
            }
            _ => TransformConfig::embedding(d, m, alpha, Projection::seeded_gaussian(d, m, rng.random())),
        }
        .expect("valid config");
        let (va, vb) = (gaussian(&mut rng, d, 1.0), gaussian(&mut rng, d, 1.0));
        let f = gaussian(&mut rng, m, 1.0);
        let mut fb = f.clone();
        if opts.inject_fault {
            fb[0] += 1.0;
        }
        let ta = cfg.apply(&va, &f).expect("valid input");
        let tb = cfg.apply(&vb, &fb).expect("valid input");
        let original = dist(&va, &vb);
        let rel = (dist(&ta, &tb) - original).abs() / original;
        worst = worst.max(rel);
        if !(rel <= PRESERVATION_TOLERANCE) {
            failures += 1;
        }
    }
    SuiteResult {
        name: "variant offset cancellation",
        trials: opts.trials,
        failures,
        worst,
    }
}

/// Retrieval size is non-increasing in alpha and lambda, non-decreasing in
/// k and c, and within `[k, N]`.
pub fn k_prime_suite(opts: &VerifyOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x07);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..opts.trials {
        let k = rng.random_range(1..=100usize);
        let lambda = rng.random_range(0.01..=1.0);
        let alpha = rng.random_range(1.0..8.0);
        let c = rng.random_range(0.1..16.0);
        let n = rng.random_range(1..=100_000usize);
        let kp = |k, l, a, c| compute_k_prime(k, l, a, c, n).expect("valid parameters");
        let base = kp(k, lambda, alpha, c);
        let mut ok = base >= k.min(n) && base <= n;
        ok &= kp(k, lambda, alpha * 1.5, c) <= base;
        ok &= kp(k, (lambda * 1.5).min(1.0), alpha, c) <= base;
        ok &= kp(k + 1, lambda, alpha, c) >= base;
        ok &= kp(k, lambda, alpha, c * 1.5) >= base;
        if opts.inject_fault {
            ok = false;
        }
        if !ok {
            failures += 1;
            worst = worst.max(base as f64);
        }
    }
    SuiteResult {
        name: "retrieval size monotonicity",
        trials: opts.trials,
        failures,
        worst,
    }
}

pub fn run_suites(opts: &VerifyOptions) -> Result<Vec<SuiteResult>> {
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    Ok(vec![
        preservation_suite(opts),
        expansion_suite(opts),
        pure_filter_suite(opts),
        linearity_suite(opts),
        separation_suite(opts),
        variant_cancellation_suite(opts),
        k_prime_suite(opts),
    ])
}
