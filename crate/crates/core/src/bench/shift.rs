//! Distribution-shift scenarios: build on the original distribution,
//! measure, shift records or queries, and re-measure without rebuilding.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::runner::{environment, measure, oracle_ids, BenchParams, BenchReport, Engine, Method};
use super::workload::{attr_name, Dataset, Generator, Query, Shift, WorkloadSpec};
use crate::engine::RecordStore;
use crate::error::{Error, Result};
use crate::transform::{AttrValue, Predicate, QueryFilter};

/// Share of the post-shift dataset contributed by the new component.
pub const VECTOR_SHIFT_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDelta {
    pub method: String,
    pub backend: String,
    pub recall_before: f64,
    pub recall_after: f64,
    /// `recall_before - recall_after`; positive means worse.
    pub recall_degradation: f64,
    pub mean_ms_before: f64,
    pub mean_ms_after: f64,
    pub latency_increase_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub scenario: Shift,
    pub before: BenchReport,
    pub after: BenchReport,
    pub deltas: Vec<ShiftDelta>,
}

impl ShiftReport {
    pub fn delta(&self, method: Method) -> Option<&ShiftDelta> {
        self.deltas
            .iter()
            .find(|r| r.method == method.family() && r.backend == method.backend_name())
    }
}

/// Replaces the exact predicate on the attribute with the most levels
/// (`group` only when it is the sole attribute) by its full level range.
pub fn widen_query(q: &Query, levels: &[usize]) -> Query {
    let target = if levels.len() == 1 {
        0
    } else {
        (1..levels.len()).max_by_key(|&j| (levels[j], std::cmp::Reverse(j))).unwrap_or(1)
    };
    let predicates = q
        .levels
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            if j == target {
                Predicate::range(&attr_name(j), 0.0, (levels[j].max(1) - 1) as f64)
            } else {
                Predicate::exact(&attr_name(j), AttrValue::Num(l as f64))
            }
        })
        .collect();
    Query {
        filter: QueryFilter::new(predicates),
        ..q.clone()
    }
}

/// Keeps `group` exact and turns every other attribute into a range of
/// up to three levels around the query's level.
pub fn multi_range_query(q: &Query, levels: &[usize]) -> Query {
    let predicates = q
        .levels
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let name = attr_name(j);
            if j == 0 {
                return Predicate::exact(&name, AttrValue::Num(l as f64));
            }
            let top = levels[j].max(1) as u32 - 1;
            Predicate::range(&name, l.saturating_sub(1) as f64, (l + 1).min(top) as f64)
        })
        .collect();
    Query {
        filter: QueryFilter::new(predicates),
        ..q.clone()
    }
}

fn recount(queries: Vec<Query>, data: &Dataset) -> Result<Vec<Query>> {
    queries
        .into_iter()
        .map(|mut q| {
            q.matches = data.count_matches(&q.filter)?;
            Ok(q)
        })
        .collect()
}

pub fn run_shift_scenario(spec: &WorkloadSpec, methods: &[Method], params: &BenchParams) -> Result<ShiftReport> {
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods selected".into()));
    }
    let mut gen = Generator::new(spec)?;
    let mut data = gen.records(spec.n);
    let queries = gen.queries(&data, spec.queries)?;
    let mut reference = RecordStore::new(data.schema.clone(), data.d, data.vectors.clone(), data.filters.clone())?;

    let mut engines = Vec::with_capacity(methods.len());
    for &method in methods {
        let t = Instant::now();
        let engine = Engine::build(method, &reference, params)?;
        engines.push((method, engine, t.elapsed().as_secs_f64()));
    }
    let oracle = oracle_ids(&reference, &queries, params)?;
    let mut before = Vec::with_capacity(methods.len());
    for (method, engine, build_s) in &engines {
        before.push(measure(*method, engine, &queries, &oracle, params, *build_s)?);
    }

    let after_queries = match spec.shift {
        Shift::None => queries.clone(),
        Shift::FilterShift => recount(
            queries.iter().map(|q| widen_query(q, gen.levels())).collect(),
            &data,
        )?,
        Shift::QueryShift => recount(
            queries.iter().map(|q| multi_range_query(q, gen.levels())).collect(),
            &data,
        )?,
        Shift::VectorShift => {
            let component = gen.add_component();
            let count = ((spec.n as f64) * VECTOR_SHIFT_SHARE / (1.0 - VECTOR_SHIFT_SHARE)).round() as usize;
            let fresh = gen.component_records(component, count.max(1));
            let m = data.schema.dim();
            for i in 0..fresh.len() {
                let v = &fresh.vectors[i * spec.d..(i + 1) * spec.d];
                let f = fresh.filter(i);
                reference.push(v, f)?;
                for (_, engine, _) in &mut engines {
                    engine.insert(v, f)?;
                }
            }
            data.vectors.extend_from_slice(&fresh.vectors);
            data.filters.extend_from_slice(&fresh.filters);
            data.components.extend_from_slice(&fresh.components);
            debug_assert_eq!(data.filters.len(), data.len() * m);
            let per_profile: usize = gen.levels()[1..].iter().product();
            let target = fresh.len() as f64 / per_profile.max(1) as f64;
            gen.queries_near(&fresh, spec.queries, Some(component), target)?
        }
    };

    let oracle = oracle_ids(&reference, &after_queries, params)?;
    let mut after = Vec::with_capacity(methods.len());
    for (method, engine, build_s) in &engines {
        after.push(measure(*method, engine, &after_queries, &oracle, params, *build_s)?);
    }

    let deltas = before
        .iter()
        .zip(&after)
        .map(|(b, a)| ShiftDelta {
            method: b.method.clone(),
            backend: b.backend.clone(),
            recall_before: b.recall_at_k,
            recall_after: a.recall_at_k,
            recall_degradation: b.recall_at_k - a.recall_at_k,
            mean_ms_before: b.mean_ms,
            mean_ms_after: a.mean_ms,
            latency_increase_pct: (a.mean_ms - b.mean_ms) / b.mean_ms * 100.0,
        })
        .collect();
    Ok(ShiftReport {
        scenario: spec.shift,
        before: BenchReport {
            rows: before,
            environment: environment(spec.n, queries.len(), params),
        },
        after: BenchReport {
            rows: after,
            environment: environment(reference.live_len(), after_queries.len(), params),
        },
        deltas,
    })
}
