//! Filter attribute schemas and the raw filter-vector encoding.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One attribute value as supplied by a record or a predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Num(f64),
    Cat(String),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Num(x) => write!(f, "{x}"),
            AttrValue::Cat(s) => f.write_str(s),
        }
    }
}

impl From<f64> for AttrValue {
    fn from(x: f64) -> Self {
        AttrValue::Num(x)
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Cat(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    /// A scalar slot. With both `range` and `buckets` set, values are
    /// quantized to bucket centers before encoding.
    Numeric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buckets: Option<u32>,
    },
    /// A one-hot block with one slot per category.
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: &str) -> Self {
        Attribute {
            name: name.to_string(),
            kind: AttributeKind::Numeric {
                range: None,
                buckets: None,
            },
        }
    }

    pub fn numeric_in(name: &str, lo: f64, hi: f64) -> Self {
        Attribute {
            name: name.to_string(),
            kind: AttributeKind::Numeric {
                range: Some([lo, hi]),
                buckets: None,
            },
        }
    }

    pub fn bucketed(name: &str, lo: f64, hi: f64, buckets: u32) -> Self {
        Attribute {
            name: name.to_string(),
            kind: AttributeKind::Numeric {
                range: Some([lo, hi]),
                buckets: Some(buckets),
            },
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, categories: &[S]) -> Self {
        Attribute {
            name: name.to_string(),
            kind: AttributeKind::Categorical {
                categories: categories.iter().map(|c| c.as_ref().to_string()).collect(),
            },
        }
    }

    /// Number of filter-vector slots this attribute occupies.
    pub fn width(&self) -> usize {
        match &self.kind {
            AttributeKind::Numeric { .. } => 1,
            AttributeKind::Categorical { categories } => categories.len(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric { .. })
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        match &self.kind {
            AttributeKind::Categorical { categories } => {
                categories.iter().position(|c| c == value)
            }
            AttributeKind::Numeric { .. } => None,
        }
    }

    /// Applies bucket quantization when configured, otherwise returns `x`.
    pub fn quantize(&self, x: f64) -> f64 {
        match self.kind {
            AttributeKind::Numeric {
                range: Some([lo, hi]),
                buckets: Some(b),
            } => {
                let width = (hi - lo) / b as f64;
                let idx = ((x - lo) / width).floor().clamp(0.0, (b - 1) as f64);
                lo + (idx + 0.5) * width
            }
            _ => x,
        }
    }
}

/// Ordered attribute descriptors; fixes the layout of every filter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct FilterSchema {
    attributes: Vec<Attribute>,
    offsets: Vec<usize>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    attributes: Vec<Attribute>,
}

impl TryFrom<SchemaDoc> for FilterSchema {
    type Error = Error;

    fn try_from(doc: SchemaDoc) -> Result<Self> {
        FilterSchema::new(doc.attributes)
    }
}

impl From<FilterSchema> for SchemaDoc {
    fn from(schema: FilterSchema) -> Self {
        SchemaDoc {
            attributes: schema.attributes,
        }
    }
}

impl FilterSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::InvalidParameter("schema has no attributes".into()));
        }
        let mut names = HashSet::new();
        for attr in &attributes {
            if !names.insert(attr.name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate attribute `{}`",
                    attr.name
                )));
            }
            match &attr.kind {
                AttributeKind::Categorical { categories } => {
                    if categories.is_empty() {
                        return Err(Error::InvalidParameter(format!(
                            "categorical attribute `{}` has no categories",
                            attr.name
                        )));
                    }
                    let unique: HashSet<_> = categories.iter().collect();
                    if unique.len() != categories.len() {
                        return Err(Error::InvalidParameter(format!(
                            "categorical attribute `{}` has duplicate categories",
                            attr.name
                        )));
                    }
                }
                AttributeKind::Numeric { range, buckets } => {
                    if let Some([lo, hi]) = range {
                        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                            return Err(Error::InvalidParameter(format!(
                                "numeric attribute `{}` has invalid range [{lo}, {hi}]",
                                attr.name
                            )));
                        }
                    }
                    match (range, buckets) {
                        (_, Some(0)) => {
                            return Err(Error::InvalidParameter(format!(
                                "attribute `{}`: buckets must be >= 1",
                                attr.name
                            )))
                        }
                        (None, Some(_)) => {
                            return Err(Error::InvalidParameter(format!(
                                "attribute `{}`: buckets require a range",
                                attr.name
                            )))
                        }
                        _ => {}
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(attributes.len());
        let mut dim = 0;
        for attr in &attributes {
            offsets.push(dim);
            dim += attr.width();
        }
        Ok(FilterSchema {
            attributes,
            offsets,
            dim,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Encoded filter dimension m.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn offset(&self, attr: usize) -> usize {
        self.offsets[attr]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// Encodes the values of one record, given in schema order.
    pub fn encode(&self, values: &[AttrValue]) -> Result<FilterVector> {
        if values.len() != self.attributes.len() {
            let missing = &self.attributes[values.len().min(self.attributes.len() - 1)];
            return Err(Error::MissingAttribute(missing.name.clone()));
        }
        let mut out = vec![0.0; self.dim];
        for (i, (attr, value)) in self.attributes.iter().zip(values).enumerate() {
            self.encode_into(i, attr, value, &mut out)?;
        }
        Ok(FilterVector { values: out })
    }

    /// Encodes a record given as a name → value map.
    pub fn encode_named(&self, values: &BTreeMap<String, AttrValue>) -> Result<FilterVector> {
        for name in values.keys() {
            self.index_of(name)?;
        }
        let ordered = self
            .attributes
            .iter()
            .map(|a| {
                values
                    .get(&a.name)
                    .cloned()
                    .ok_or_else(|| Error::MissingAttribute(a.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.encode(&ordered)
    }

    /// Writes the encoding of a single attribute value into its slots.
    pub(crate) fn encode_into(
        &self,
        attr_idx: usize,
        attr: &Attribute,
        value: &AttrValue,
        out: &mut [f64],
    ) -> Result<()> {
        let off = self.offsets[attr_idx];
        match (&attr.kind, value) {
            (AttributeKind::Numeric { .. }, AttrValue::Num(x)) => {
                if !x.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite value for `{}`",
                        attr.name
                    )));
                }
                out[off] = attr.quantize(*x);
            }
            (AttributeKind::Numeric { .. }, AttrValue::Cat(s)) => {
                return Err(Error::InvalidParameter(format!(
                    "attribute `{}` is numeric, got `{s}`",
                    attr.name
                )))
            }
            (AttributeKind::Categorical { categories }, _) => {
                let label = value.to_string();
                let idx = categories.iter().position(|c| *c == label).ok_or_else(|| {
                    Error::UnknownCategory {
                        attribute: attr.name.clone(),
                        value: label.clone(),
                    }
                })?;
                out[off..off + categories.len()].fill(0.0);
                out[off + idx] = 1.0;
            }
        }
        Ok(())
    }

    /// Recovers attribute values from a raw (un-normalized) encoded filter.
    pub fn decode(&self, raw: &[f32]) -> Result<Vec<AttrValue>> {
        if raw.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: raw.len(),
            });
        }
        Ok(self
            .attributes
            .iter()
            .zip(&self.offsets)
            .map(|(attr, &off)| match &attr.kind {
                AttributeKind::Numeric { .. } => AttrValue::Num(raw[off] as f64),
                AttributeKind::Categorical { categories } => {
                    let block = &raw[off..off + categories.len()];
                    let idx = block
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, &x)| if x > block[best] { i } else { best });
                    AttrValue::Cat(categories[idx].clone())
                }
            })
            .collect())
    }
}

/// A filter vector of dimension m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVector {
    pub values: Vec<f64>,
}

impl FilterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0, dim: i });
        }
        Ok(FilterVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Rounds every slot through `f32`, the storage precision of raw filters.
    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&x| x as f32).collect()
    }
}

/// Convenience wrapper: encode `raw` values (schema order) with `schema`.
pub fn encode_filter_values(schema: &FilterSchema, raw: &[AttrValue]) -> Result<FilterVector> {
    schema.encode(raw)
}
