//! Seeded synthetic workloads.
//!
//! Vectors come from a Gaussian mixture: component centers are drawn from
//! `N(0, spread^2 I)` and points add unit-variance noise. Filters are
//! integer-level numeric attributes. Attribute `group` equals the point's
//! component with probability `correlation` (uniform otherwise); the rest
//! are uniform with level counts chosen so that an exact predicate on every
//! attribute matches about `selectivity * n` records.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{AttrValue, Attribute, FilterSchema, Predicate, QueryFilter};

/// Accepted deviation of a query's measured match count from the target.
pub const SELECTIVITY_TOLERANCE: f64 = 0.2;
const MAX_QUERY_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    None,
    FilterShift,
    VectorShift,
    QueryShift,
}

impl FromStr for Shift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "none" => Ok(Shift::None),
            "filter_shift" | "filter" => Ok(Shift::FilterShift),
            "vector_shift" | "vector" => Ok(Shift::VectorShift),
            "query_shift" | "query" => Ok(Shift::QueryShift),
            _ => Err(Error::InvalidParameter(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSpec {
    pub n: usize,
    pub d: usize,
    /// Number of filter attributes (all numeric, one slot each).
    pub m: usize,
    pub clusters: usize,
    pub selectivity: f64,
    pub queries: usize,
    pub seed: u64,
    pub shift: Shift,
    /// Standard deviation of component centers.
    pub spread: f64,
    /// Probability that `group` equals the vector's component.
    pub correlation: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            n: 10_000,
            d: 64,
            m: 4,
            clusters: 5,
            selectivity: 0.01,
            queries: 100,
            seed: 42,
            shift: Shift::None,
            spread: 3.0,
            correlation: 0.98,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n", self.n),
            ("d", self.d),
            ("m", self.m),
            ("clusters", self.clusters),
            ("queries", self.queries),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 1")));
            }
        }
        if !(self.selectivity > 0.0 && self.selectivity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "selectivity must be in (0, 1] (got {})",
                self.selectivity
            )));
        }
        if self.selectivity * (self.n as f64) < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "infeasible selectivity {} for n = {}",
                self.selectivity, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.correlation) || !(self.spread >= 0.0) {
            return Err(Error::InvalidParameter(
                "correlation must be in [0, 1] and spread >= 0".into(),
            ));
        }
        self.levels().map(|_| ())
    }

    /// Level counts per attribute; `group` first with one level per
    /// component.
    pub fn levels(&self) -> Result<Vec<usize>> {
        let target = 1.0 / (self.selectivity * self.clusters as f64);
        let mut levels = vec![self.clusters];
        if self.m > 1 {
            let mut rest = vec![1usize; self.m - 2];
            let mut prod = 1usize;
            for r in &mut rest {
                if (prod * 4) as f64 <= target {
                    *r = 2;
                    prod *= 2;
                }
            }
            let first = ((target / prod as f64).round() as usize).max(1);
            levels.push(first);
            levels.extend(rest);
        }
        let achieved: usize = levels[1..].iter().product();
        if ((achieved as f64) / target - 1.0).abs() > SELECTIVITY_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "infeasible selectivity {} with {} clusters and m = {}",
                self.selectivity, self.clusters, self.m
            )));
        }
        Ok(levels)
    }

    pub fn schema(&self) -> Result<FilterSchema> {
        let levels = self.levels()?;
        FilterSchema::new(
            levels
                .iter()
                .enumerate()
                .map(|(j, &l)| Attribute::numeric_in(&attr_name(j), 0.0, (l.max(2) - 1) as f64))
                .collect(),
        )
    }
}

pub fn attr_name(j: usize) -> String {
    if j == 0 {
        "group".into()
    } else {
        format!("a{j}")
    }
}

/// Raw records: row-major vectors and encoded filters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FilterSchema,
    pub d: usize,
    pub vectors: Vec<f32>,
    pub filters: Vec<f32>,
    /// Generating component of each record.
    pub components: Vec<u32>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn filter(&self, i: usize) -> &[f32] {
        let m = self.schema.dim();
        &self.filters[i * m..(i + 1) * m]
    }

    /// Records matching every predicate of `qf`.
    pub fn count_matches(&self, qf: &QueryFilter) -> Result<usize> {
        let compiled = qf.compile(&self.schema)?;
        Ok((0..self.len()).filter(|&i| compiled.matches(self.filter(i))).count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub vector: Vec<f32>,
    pub filter: QueryFilter,
    /// Component the query vector was drawn from.
    pub component: u32,
    /// Attribute levels the predicates were derived from.
    pub levels: Vec<u32>,
    /// Measured number of matching records at generation time.
    pub matches: usize,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub spec: WorkloadSpec,
    pub dataset: Dataset,
    pub queries: Vec<Query>,
}

/// Stateful generator; shift scenarios keep drawing from it.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: WorkloadSpec,
    levels: Vec<usize>,
    schema: FilterSchema,
    centers: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(spec: &WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let centers = (0..spec.clusters)
            .map(|_| gaussian(&mut rng, spec.d, spec.spread))
            .collect();
        Ok(Generator {
            levels: spec.levels()?,
            schema: spec.schema()?,
            spec: spec.clone(),
            centers,
            rng,
        })
    }

    pub fn schema(&self) -> &FilterSchema {
        &self.schema
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Adds a fresh component and returns its index.
    pub fn add_component(&mut self) -> u32 {
        let c = gaussian(&mut self.rng, self.spec.d, self.spec.spread);
        self.centers.push(c);
        (self.centers.len() - 1) as u32
    }

    fn vector(&mut self, component: u32) -> Vec<f32> {
        let center = &self.centers[component as usize];
        center
            .iter()
            .map(|&c| (c + self.rng.sample::<f64, _>(StandardNormal)) as f32)
            .collect()
    }

    fn attribute_levels(&mut self, component: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.levels.len());
        let group = if self.rng.random::<f64>() < self.spec.correlation {
            component
        } else {
            self.rng.random_range(0..self.spec.clusters as u32)
        };
        out.push(group);
        for &l in &self.levels[1..] {
            out.push(self.rng.random_range(0..l as u32));
        }
        out
    }

    /// One record from `component`: vector and raw filter levels.
    pub fn record(&mut self, component: u32) -> (Vec<f32>, Vec<u32>) {
        let v = self.vector(component);
        let f = self.attribute_levels(component);
        (v, f)
    }

    /// `count` records; components uniform over the original mixture.
    pub fn records(&mut self, count: usize) -> Dataset {
        let k = self.spec.clusters as u32;
        let mut data = Dataset {
            schema: self.schema.clone(),
            d: self.spec.d,
            vectors: Vec::with_capacity(count * self.spec.d),
            filters: Vec::with_capacity(count * self.levels.len()),
            components: Vec::with_capacity(count),
        };
        for _ in 0..count {
            let c = self.rng.random_range(0..k);
            self.push_record(&mut data, c);
        }
        data
    }

    /// Appends one record of `component` to `data`.
    pub fn push_record(&mut self, data: &mut Dataset, component: u32) {
        let (v, f) = self.record(component);
        data.vectors.extend_from_slice(&v);
        data.filters.extend(f.iter().map(|&x| x as f32));
        data.components.push(component);
    }

    /// Records of a single component, with `group` fixed to it.
    pub fn component_records(&mut self, component: u32, count: usize) -> Dataset {
        let mut data = Dataset {
            schema: self.schema.clone(),
            d: self.spec.d,
            vectors: Vec::new(),
            filters: Vec::new(),
            components: Vec::new(),
        };
        for _ in 0..count {
            let v = self.vector(component);
            let mut f = self.attribute_levels(component);
            f[0] = component;
            data.vectors.extend_from_slice(&v);
            data.filters.extend(f.iter().map(|&x| x as f32));
            data.components.push(component);
        }
        data
    }

    /// Exact-predicate queries whose measured match count on `data` lies
    /// within the tolerance of `selectivity * n`.
    pub fn queries(&mut self, data: &Dataset, count: usize) -> Result<Vec<Query>> {
        let target = self.spec.selectivity * self.spec.n as f64;
        self.queries_near(data, count, None, target)
    }

    /// Exact-predicate queries matching about `target` records of `data`.
    /// `component` pins the query component (and its group); otherwise it
    /// is drawn uniformly.
    pub fn queries_near(
        &mut self,
        data: &Dataset,
        count: usize,
        component: Option<u32>,
        target: f64,
    ) -> Result<Vec<Query>> {
        let (lo, hi) = (
            target * (1.0 - SELECTIVITY_TOLERANCE),
            target * (1.0 + SELECTIVITY_TOLERANCE),
        );
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            attempts += 1;
            if attempts > MAX_QUERY_ATTEMPTS + count {
                return Err(Error::InvalidParameter(format!(
                    "could not draw queries matching ~{target} of {} records",
                    data.len()
                )));
            }
            let c = component.unwrap_or_else(|| self.rng.random_range(0..self.spec.clusters as u32));
            let vector = self.vector(c);
            let mut levels = self.attribute_levels(c);
            if component.is_some() {
                levels[0] = c;
            }
            let filter = exact_filter(&levels);
            let matches = data.count_matches(&filter)?;
            if (matches as f64) < lo || (matches as f64) > hi {
                continue;
            }
            out.push(Query {
                vector,
                filter,
                component: c,
                levels,
                matches,
            });
        }
        Ok(out)
    }
}

pub fn exact_filter(levels: &[u32]) -> QueryFilter {
    QueryFilter::new(
        levels
            .iter()
            .enumerate()
            .map(|(j, &l)| Predicate::exact(&attr_name(j), AttrValue::Num(l as f64)))
            .collect(),
    )
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Generates records and exact-predicate queries for `spec`.
pub fn gen_synthetic(spec: &WorkloadSpec) -> Result<Workload> {
    let mut g = Generator::new(spec)?;
    let dataset = g.records(spec.n);
    let queries = g.queries(&dataset, spec.queries)?;
    Ok(Workload {
        spec: spec.clone(),
        dataset,
        queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_factorization() {
        let spec = WorkloadSpec::default();
        assert_eq!(spec.levels().unwrap(), vec![5, 5, 2, 2]);
        let two = WorkloadSpec { m: 2, ..spec.clone() };
        assert_eq!(two.levels().unwrap(), vec![5, 20]);
        let one = WorkloadSpec { m: 1, ..spec.clone() };
        assert!(one.levels().is_err());
        let coarse = WorkloadSpec { m: 1, selectivity: 0.2, ..spec.clone() };
        assert_eq!(coarse.levels().unwrap(), vec![5]);
    }

    #[test]
    fn infeasible_selectivity() {
        let spec = WorkloadSpec {
            n: 100,
            selectivity: 0.001,
            ..WorkloadSpec::default()
        };
        assert!(spec.validate().is_err());
        assert!(WorkloadSpec { selectivity: 0.0, ..WorkloadSpec::default() }.validate().is_err());
        assert!(WorkloadSpec { m: 0, ..WorkloadSpec::default() }.validate().is_err());
    }

    #[test]
    fn deterministic() {
        let spec = WorkloadSpec {
            n: 2000,
            queries: 5,
            ..WorkloadSpec::default()
        };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.queries, b.queries);
    }

    #[test]
    fn queries_hit_selectivity() {
        let spec = WorkloadSpec {
            n: 10_000,
            queries: 20,
            ..WorkloadSpec::default()
        };
        let w = gen_synthetic(&spec).unwrap();
        for q in &w.queries {
            let count = w.dataset.count_matches(&q.filter).unwrap();
            assert_eq!(count, q.matches);
            assert!((80..=120).contains(&count), "{count}");
        }
    }
}
