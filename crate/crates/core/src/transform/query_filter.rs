//! Structured query predicates, their textual form, and their expansion into
//! probe filter vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schema::{AttrValue, AttributeKind, FilterSchema, FilterVector};
use crate::error::{Error, Result};

/// Upper bound on probe vectors produced by one query filter.
pub const DEFAULT_PROBE_CAP: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    Exact { attr: String, value: AttrValue },
    Range { attr: String, lo: f64, hi: f64 },
    OneOf { attr: String, values: Vec<AttrValue> },
}

impl Predicate {
    pub fn attr(&self) -> &str {
        match self {
            Predicate::Exact { attr, .. }
            | Predicate::Range { attr, .. }
            | Predicate::OneOf { attr, .. } => attr,
        }
    }

    pub fn exact(attr: &str, value: impl Into<AttrValue>) -> Self {
        Predicate::Exact {
            attr: attr.to_string(),
            value: value.into(),
        }
    }

    pub fn range(attr: &str, lo: f64, hi: f64) -> Self {
        Predicate::Range {
            attr: attr.to_string(),
            lo,
            hi,
        }
    }

    pub fn one_of<V: Into<AttrValue>>(attr: &str, values: impl IntoIterator<Item = V>) -> Self {
        Predicate::OneOf {
            attr: attr.to_string(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }
}

/// A conjunction of predicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFilter {
    pub predicates: Vec<Predicate>,
}

impl QueryFilter {
    pub fn new(predicates: Vec<Predicate>) -> Self {
        QueryFilter { predicates }
    }

    /// True when the filter contains a range or one-of predicate.
    pub fn is_expanding(&self) -> bool {
        self.predicates
            .iter()
            .any(|p| !matches!(p, Predicate::Exact { .. }))
    }

    /// Resolves predicates against `schema` into slot-level checks.
    pub fn compile(&self, schema: &FilterSchema) -> Result<CompiledFilter> {
        validate(schema, self)?;
        let mut checks = Vec::with_capacity(self.predicates.len());
        for pred in &self.predicates {
            let idx = schema.index_of(pred.attr())?;
            let attr = &schema.attributes()[idx];
            let off = schema.offset(idx);
            let check = match (&attr.kind, pred) {
                (AttributeKind::Numeric { .. }, Predicate::Exact { value, .. }) => {
                    SlotCheck::NumIn(off, vec![storage_value(attr.quantize(num(value, &attr.name)?))])
                }
                (AttributeKind::Numeric { .. }, Predicate::OneOf { values, .. }) => {
                    let vals = values
                        .iter()
                        .map(|v| num(v, &attr.name).map(|x| storage_value(attr.quantize(x))))
                        .collect::<Result<Vec<_>>>()?;
                    SlotCheck::NumIn(off, vals)
                }
                (AttributeKind::Numeric { .. }, Predicate::Range { lo, hi, .. }) => {
                    SlotCheck::NumRange(off, *lo, *hi)
                }
                (AttributeKind::Categorical { .. }, Predicate::Exact { value, .. }) => {
                    SlotCheck::HotIn(vec![off + category(attr, value)?])
                }
                (AttributeKind::Categorical { .. }, Predicate::OneOf { values, .. }) => {
                    let slots = values
                        .iter()
                        .map(|v| category(attr, v).map(|c| off + c))
                        .collect::<Result<Vec<_>>>()?;
                    SlotCheck::HotIn(slots)
                }
                (AttributeKind::Categorical { .. }, Predicate::Range { .. }) => unreachable!(),
            };
            checks.push(check);
        }
        Ok(CompiledFilter { checks })
    }
}

fn storage_value(x: f64) -> f64 {
    x as f32 as f64
}

fn num(value: &AttrValue, attr: &str) -> Result<f64> {
    match value {
        AttrValue::Num(x) => Ok(*x),
        AttrValue::Cat(s) => s.trim().parse::<f64>().map_err(|_| {
            Error::InvalidPredicate(format!("attribute `{attr}` is numeric, got `{s}`"))
        }),
    }
}

fn category(attr: &super::schema::Attribute, value: &AttrValue) -> Result<usize> {
    let label = value.to_string();
    attr.category_index(&label)
        .ok_or_else(|| Error::UnknownCategory {
            attribute: attr.name.clone(),
            value: label,
        })
}

fn validate(schema: &FilterSchema, qf: &QueryFilter) -> Result<()> {
    if qf.predicates.is_empty() {
        return Err(Error::InvalidPredicate("empty predicate set".into()));
    }
    let mut seen = vec![false; schema.attributes().len()];
    for pred in &qf.predicates {
        let idx = schema.index_of(pred.attr())?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::InvalidPredicate(format!(
                "attribute `{}` constrained more than once",
                pred.attr()
            )));
        }
        let attr = &schema.attributes()[idx];
        match pred {
            Predicate::Range { lo, hi, .. } => {
                if !attr.is_numeric() {
                    return Err(Error::InvalidPredicate(format!(
                        "range predicate on categorical attribute `{}`",
                        attr.name
                    )));
                }
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidPredicate("non-finite range bound".into()));
                }
                if lo > hi {
                    return Err(Error::InvalidPredicate(format!(
                        "empty range for `{}`: {lo} > {hi}",
                        attr.name
                    )));
                }
            }
            Predicate::OneOf { values, .. } if values.is_empty() => {
                return Err(Error::InvalidPredicate(format!(
                    "empty one-of list for `{}`",
                    attr.name
                )));
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum SlotCheck {
    NumIn(usize, Vec<f64>),
    NumRange(usize, f64, f64),
    HotIn(Vec<usize>),
}

/// Predicate checks resolved to filter-vector slots; evaluated against raw
/// (un-normalized) encoded filters.
#[derive(Debug, Clone)]
pub struct CompiledFilter {
    checks: Vec<SlotCheck>,
}

impl CompiledFilter {
    /// Evaluates every check (no short-circuit), so scan cost does not
    /// depend on record order.
    pub fn matches(&self, raw: &[f32]) -> bool {
        self.checks.iter().fold(true, |ok, check| ok & match check {
            SlotCheck::NumIn(slot, vals) => {
                let x = raw[*slot] as f64;
                vals.contains(&x)
            }
            SlotCheck::NumRange(slot, lo, hi) => {
                let x = raw[*slot] as f64;
                *lo <= x && x <= *hi
            }
            SlotCheck::HotIn(slots) => slots.iter().any(|&s| raw[s] == 1.0),
        })
    }
}

/// Probe filter vectors for one query filter, in raw (un-normalized) units.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub vectors: Vec<FilterVector>,
    /// Slots of attributes the query leaves unconstrained. They hold a
    /// schema-neutral placeholder in `vectors`; callers with dataset
    /// statistics substitute the mean.
    pub free_slots: Vec<usize>,
    /// Number of probes before the cap was applied.
    pub expanded: u128,
    pub trimmed: bool,
}

/// Expands `qf` into probe vectors: exact predicates contribute one value,
/// a range contributes `probes` evenly spaced values (its center when
/// `probes == 1`), a one-of contributes each listed value. Expanding
/// predicates combine by Cartesian product, capped at `cap`.
pub fn encode_query_filter(
    schema: &FilterSchema,
    qf: &QueryFilter,
    probes: usize,
) -> Result<ProbeSet> {
    encode_query_filter_capped(schema, qf, probes, DEFAULT_PROBE_CAP)
}

pub fn encode_query_filter_capped(
    schema: &FilterSchema,
    qf: &QueryFilter,
    probes: usize,
    cap: usize,
) -> Result<ProbeSet> {
    if probes == 0 {
        return Err(Error::InvalidParameter("probes must be >= 1".into()));
    }
    if cap == 0 {
        return Err(Error::InvalidParameter("probe cap must be >= 1".into()));
    }
    validate(schema, qf)?;

    let attrs = schema.attributes();
    // Per attribute: the alternative encodings of its slot block.
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(attrs.len());
    let mut free_slots = Vec::new();
    for (idx, attr) in attrs.iter().enumerate() {
        let off = schema.offset(idx);
        let width = attr.width();
        let pred = qf.predicates.iter().find(|p| p.attr() == attr.name);
        let encode_one = |value: &AttrValue| -> Result<Vec<f64>> {
            let mut out = vec![0.0; schema.dim()];
            let value = match (&attr.kind, value) {
                (AttributeKind::Numeric { .. }, v) => AttrValue::Num(num(v, &attr.name)?),
                (_, v) => v.clone(),
            };
            schema.encode_into(idx, attr, &value, &mut out)?;
            Ok(out[off..off + width].to_vec())
        };
        let alternatives = match pred {
            None => {
                free_slots.extend(off..off + width);
                vec![neutral_block(&attr.kind)]
            }
            Some(Predicate::Exact { value, .. }) => vec![encode_one(value)?],
            Some(Predicate::OneOf { values, .. }) => values
                .iter()
                .map(&encode_one)
                .collect::<Result<Vec<_>>>()?,
            Some(Predicate::Range { lo, hi, .. }) => range_points(*lo, *hi, probes)
                .into_iter()
                .map(|x| encode_one(&AttrValue::Num(x)))
                .collect::<Result<Vec<_>>>()?,
        };
        blocks.push(dedup(alternatives));
    }

    let expanded = blocks
        .iter()
        .fold(1u128, |acc, b| acc.saturating_mul(b.len() as u128));
    let selected: Vec<u128> = if expanded <= cap as u128 {
        (0..expanded).collect()
    } else {
        stratified(expanded, cap)
    };
    let vectors = selected
        .into_iter()
        .map(|flat| {
            let mut values = Vec::with_capacity(schema.dim());
            let mut rest = flat;
            // Mixed-radix decode, last attribute varying fastest.
            let mut picks = vec![0usize; blocks.len()];
            for (i, b) in blocks.iter().enumerate().rev() {
                let len = b.len() as u128;
                picks[i] = (rest % len) as usize;
                rest /= len;
            }
            for (b, &p) in blocks.iter().zip(&picks) {
                values.extend_from_slice(&b[p]);
            }
            FilterVector { values }
        })
        .collect::<Vec<_>>();
    let vectors = dedup_vectors(vectors);
    Ok(ProbeSet {
        vectors,
        free_slots,
        expanded,
        trimmed: expanded > cap as u128,
    })
}

/// `count` evenly spaced points over `[lo, hi]` including both endpoints;
/// a single point is the center.
pub fn range_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 || lo == hi {
        return vec![lo + (hi - lo) / 2.0];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

fn neutral_block(kind: &AttributeKind) -> Vec<f64> {
    match kind {
        AttributeKind::Numeric {
            range: Some([lo, hi]),
            ..
        } => vec![lo + (hi - lo) / 2.0],
        AttributeKind::Numeric { .. } => vec![0.0],
        AttributeKind::Categorical { categories } => {
            vec![1.0 / categories.len() as f64; categories.len()]
        }
    }
}

/// Evenly spread selection of `cap` indices out of `total`.
fn stratified(total: u128, cap: usize) -> Vec<u128> {
    if cap == 1 {
        return vec![total / 2];
    }
    let last = total - 1;
    (0..cap as u128)
        .map(|i| (i * last + (cap as u128 - 1) / 2) / (cap as u128 - 1))
        .collect()
}

fn dedup(blocks: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(blocks.len());
    for b in blocks {
        if !out.iter().any(|o| bitwise_eq(o, &b)) {
            out.push(b);
        }
    }
    out
}

fn dedup_vectors(vs: Vec<FilterVector>) -> Vec<FilterVector> {
    let mut out: Vec<FilterVector> = Vec::with_capacity(vs.len());
    for v in vs {
        if !out.iter().any(|o| bitwise_eq(&o.values, &v.values)) {
            out.push(v);
        }
    }
    out
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

// ---------------------------------------------------------------------------
// Text form: `attr=value`, `attr:lo..hi`, `attr in {a,b}`, joined by commas.

impl FromStr for QueryFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut predicates = Vec::new();
        for clause in split_clauses(s)? {
            predicates.push(parse_clause(&clause)?);
        }
        if predicates.is_empty() {
            return Err(Error::InvalidPredicate("empty predicate set".into()));
        }
        Ok(QueryFilter { predicates })
    }
}

fn split_clauses(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '{' => {
                depth += 1;
                cur.push(ch);
            }
            '}' => {
                depth = depth
                    .checked_sub(1)
                    .ok_or_else(|| Error::InvalidPredicate(format!("unbalanced `}}` in `{s}`")))?;
                cur.push(ch);
            }
            ',' if depth == 0 => out.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    if depth != 0 {
        return Err(Error::InvalidPredicate(format!("unbalanced `{{` in `{s}`")));
    }
    out.push(cur);
    Ok(out
        .into_iter()
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect())
}

fn parse_value(s: &str) -> AttrValue {
    let s = s.trim();
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => AttrValue::Num(x),
        _ => AttrValue::Cat(s.to_string()),
    }
}

fn parse_clause(clause: &str) -> Result<Predicate> {
    let bad = || Error::InvalidPredicate(format!("cannot parse clause `{clause}`"));
    if let Some((attr, rest)) = clause.split_once(" in ") {
        let rest = rest.trim();
        let inner = rest
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(bad)?;
        let values: Vec<AttrValue> = inner
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(parse_value)
            .collect();
        return Ok(Predicate::OneOf {
            attr: attr.trim().to_string(),
            values,
        });
    }
    if let Some((attr, value)) = clause.split_once('=') {
        let attr = attr.trim();
        if attr.is_empty() || value.trim().is_empty() {
            return Err(bad());
        }
        return Ok(Predicate::Exact {
            attr: attr.to_string(),
            value: parse_value(value),
        });
    }
    if let Some((attr, range)) = clause.split_once(':') {
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        return Ok(Predicate::Range {
            attr: attr.trim().to_string(),
            lo,
            hi,
        });
    }
    Err(bad())
}

impl fmt::Display for QueryFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match p {
                Predicate::Exact { attr, value } => write!(f, "{attr}={value}")?,
                Predicate::Range { attr, lo, hi } => write!(f, "{attr}:{lo}..{hi}")?,
                Predicate::OneOf { attr, values } => {
                    write!(f, "{attr} in {{")?;
                    for (j, v) in values.iter().enumerate() {
                        if j > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{v}")?;
                    }
                    f.write_str("}")?;
                }
            }
        }
        Ok(())
    }
}
