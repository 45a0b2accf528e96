//! Attribute CSV ingestion: a header naming schema attributes, one record
//! per row. Extra columns are ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::transform::{AttrValue, FilterSchema};

/// Parses attribute rows from CSV text. `path` only labels errors.
pub fn parse_attributes_csv(text: &str, schema: &FilterSchema, path: &Path) -> Result<Vec<Vec<AttrValue>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let columns = schema
        .attributes()
        .iter()
        .map(|a| {
            headers
                .iter()
                .position(|h| h == a.name)
                .ok_or_else(|| parse_error(path, 1, format!("missing column `{}`", a.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_error(path, line, e.to_string()))?;
        let mut values = Vec::with_capacity(columns.len());
        for (attr, &col) in schema.attributes().iter().zip(&columns) {
            let cell = record
                .get(col)
                .ok_or_else(|| parse_error(path, line, format!("missing value for `{}`", attr.name)))?;
            let value = if attr.is_numeric() {
                let x: f64 = cell.parse().map_err(|_| {
                    parse_error(path, line, format!("`{}`: `{cell}` is not a number", attr.name))
                })?;
                if !x.is_finite() {
                    return Err(parse_error(path, line, format!("`{}` is not finite", attr.name)));
                }
                AttrValue::Num(x)
            } else {
                if attr.category_index(cell).is_none() {
                    return Err(parse_error(
                        path,
                        line,
                        format!("unknown category `{cell}` for `{}`", attr.name),
                    ));
                }
                AttrValue::Cat(cell.to_string())
            };
            values.push(value);
        }
        rows.push(values);
    }
    Ok(rows)
}

pub fn load_attributes_csv(path: impl AsRef<Path>, schema: &FilterSchema) -> Result<Vec<Vec<AttrValue>>> {
    let path = path.as_ref();
    parse_attributes_csv(&fs::read_to_string(path)?, schema, path)
}

/// Encodes attribute rows into raw filter values, checking the row count
/// against `expected` vectors.
pub fn encode_attribute_rows(schema: &FilterSchema, rows: &[Vec<AttrValue>], expected: usize) -> Result<Vec<f32>> {
    if rows.len() != expected {
        return Err(Error::InvalidParameter(format!(
            "{} attribute rows for {expected} vectors",
            rows.len()
        )));
    }
    let mut out = Vec::with_capacity(rows.len() * schema.dim());
    for row in rows {
        out.extend(schema.encode(row)?.to_f32());
    }
    Ok(out)
}

/// Renders raw filters back to CSV with a header row.
pub fn attributes_to_csv(schema: &FilterSchema, filters: &[f32]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(schema.attributes().iter().map(|a| a.name.as_str()))
        .map_err(|e| Error::Malformed(e.to_string()))?;
    for raw in filters.chunks_exact(schema.dim().max(1)) {
        let values = schema.decode(raw)?;
        w.write_record(values.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Malformed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn parse_error(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}
