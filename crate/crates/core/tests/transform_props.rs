use fcvi::transform::{
    encode_query_filter, encode_query_filter_capped, pad, padded_dim, psi_partition,
    Attribute, FilterSchema, Predicate, Projection, QueryFilter, TransformConfig,
};
use proptest::prelude::*;

/// Segment-wise reference: pad to a multiple of m, subtract alpha*f from each segment.
fn naive_psi(v: &[f64], f: &[f64], alpha: f64) -> Vec<f64> {
    let m = f.len();
    let dp = v.len().div_ceil(m) * m;
    (0..dp)
        .map(|i| v.get(i).copied().unwrap_or(0.0) - alpha * f[i % m])
        .collect()
}

/// Library partition transform on input padded to d*.
fn psi(v: &[f64], f: &[f64], alpha: f64) -> Vec<f64> {
    psi_partition(&pad(v, padded_dim(v.len(), f.len())), f, alpha).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// (m, d, va, vb, fa, fb, alpha) with arbitrary d (padding exercised).
fn tuple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (1usize..=8, 1usize..=120).prop_flat_map(|(m, d)| {
        (
            prop::collection::vec(-50.0f64..50.0, d),
            prop::collection::vec(-50.0f64..50.0, d),
            prop::collection::vec(-5.0f64..5.0, m),
            prop::collection::vec(-5.0f64..5.0, m),
            1.0f64..20.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_segment_reference((va, _vb, fa, _fb, alpha) in tuple()) {
        prop_assert_eq!(psi(&va, &fa, alpha), naive_psi(&va, &fa, alpha));
        let cfg = TransformConfig::partition(va.len(), fa.len(), alpha).unwrap();
        prop_assert_eq!(cfg.apply(&va, &fa).unwrap(), naive_psi(&va, &fa, alpha));
    }

    #[test]
    fn same_filter_preserves_distance((va, vb, fa, _fb, alpha) in tuple()) {
        let d0 = dist(&va, &vb);
        let d1 = dist(&psi(&va, &fa, alpha), &psi(&vb, &fa, alpha));
        prop_assert!((d1 - d0).abs() <= 1e-9 * d0.max(1e-300));
    }

    #[test]
    fn expansion_identity((va, vb, fa, fb, alpha) in tuple()) {
        let m = fa.len();
        let pa = psi(&va, &fa, alpha);
        let pb = psi(&vb, &fb, alpha);
        let dp = pa.len();
        let direct: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum();
        let dv: Vec<f64> = (0..dp).map(|i| va.get(i).unwrap_or(&0.0) - vb.get(i).unwrap_or(&0.0)).collect();
        let df: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
        let mut cross = 0.0;
        for (i, x) in dv.iter().enumerate() {
            cross += x * df[i % m];
        }
        let formula = dv.iter().map(|x| x * x).sum::<f64>()
            + (dp / m) as f64 * alpha * alpha * df.iter().map(|x| x * x).sum::<f64>()
            - 2.0 * alpha * cross;
        prop_assert!((direct - formula).abs() <= 1e-6 * formula.abs().max(1e-12));
    }

    #[test]
    fn pure_filter_distance_grows_with_alpha((va, _vb, fa, fb, alpha) in tuple()) {
        prop_assume!(dist(&fa, &fb) > 1e-6);
        let dp = padded_dim(va.len(), fa.len());
        let at = |a: f64| dist(&psi(&va, &fa, a), &psi(&va, &fb, a));
        let expected = ((dp / fa.len()) as f64).sqrt() * alpha * dist(&fa, &fb);
        prop_assert!((at(alpha) - expected).abs() <= 1e-9 * expected);
        prop_assert!(at(alpha * 1.1) > at(alpha));
    }

    #[test]
    fn linear_and_segment_symmetric((va, vb, fa, fb, alpha) in tuple()) {
        let vs: Vec<f64> = va.iter().zip(&vb).map(|(a, b)| a + b).collect();
        let fs: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a + b).collect();
        let lhs = psi(&vs, &fs, alpha);
        let rhs: Vec<f64> = psi(&va, &fa, alpha)
            .iter()
            .zip(psi(&vb, &fb, alpha))
            .map(|(a, b)| a + b)
            .collect();
        for (x, y) in lhs.iter().zip(&rhs) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
        // Every segment of psi(0, f) is the same -alpha*f.
        let zero = vec![0.0; va.len()];
        let off = psi(&zero, &fa, alpha);
        for seg in off.chunks(fa.len()) {
            prop_assert_eq!(seg, &off[..fa.len()]);
        }
    }

    #[test]
    fn config_apply_is_pure_and_offset_consistent((va, vb, fa, _fb, alpha) in tuple(), seed in any::<u64>()) {
        let (d, m) = (va.len(), fa.len());
        let cfgs = [
            TransformConfig::partition(d, m, alpha).unwrap(),
            TransformConfig::embedding(d, m, alpha, Projection::seeded_gaussian(d, m, seed)).unwrap(),
            TransformConfig::cluster(d, m, alpha, vec![fa.clone(), vec![0.0; m]], seed).unwrap(),
        ];
        for cfg in &cfgs {
            let a = cfg.apply(&va, &fa).unwrap();
            prop_assert_eq!(&a, &cfg.apply(&va, &fa).unwrap());
            let b = cfg.apply(&vb, &fa).unwrap();
            let d0 = dist(&va, &vb);
            prop_assert!((dist(&a, &b) - d0).abs() <= 1e-9 * d0.max(1e-300));
            let off = cfg.offset(&fa).unwrap();
            prop_assert_eq!(fcvi::transform::add_offset(&va, &off), a);
        }
    }

    #[test]
    fn probe_count_rule(lo in -100.0f64..100.0, width in 0.001f64..100.0, r in 1usize..40, cap in 1usize..40) {
        let schema = FilterSchema::new(vec![
            Attribute::numeric("price"),
            Attribute::categorical("cat", &["a", "b", "c"]),
        ]).unwrap();
        let exact = QueryFilter::new(vec![Predicate::exact("price", lo), Predicate::exact("cat", "b")]);
        prop_assert_eq!(encode_query_filter(&schema, &exact, r).unwrap().vectors.len(), 1);
        let range = QueryFilter::new(vec![Predicate::range("price", lo, lo + width)]);
        let set = encode_query_filter_capped(&schema, &range, r, cap).unwrap();
        prop_assert_eq!(set.vectors.len(), r.min(cap));
        let both = QueryFilter::new(vec![
            Predicate::range("price", lo, lo + width),
            Predicate::one_of("cat", ["a", "c"]),
        ]);
        let set = encode_query_filter_capped(&schema, &both, r, cap).unwrap();
        prop_assert!(set.vectors.len() <= cap);
        prop_assert_eq!(set.expanded, 2 * r as u128);
    }
}

