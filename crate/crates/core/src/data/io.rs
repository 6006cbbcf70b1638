//! Dataset CSV: a header of feature names in canonical order, then one row
//! of integer category indices per agent.

use std::path::Path;

use super::record::AgentRecord;
use super::schema::Schema;
use crate::error::{Error, Result};

fn csv_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

fn header(reader: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    Ok(reader
        .headers()
        .map_err(|e| csv_err(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

/// Reads records, requiring the header to equal the schema's feature names.
pub fn read_dataset(path: &Path, schema: &Schema) -> Result<Vec<AgentRecord>> {
    let mut reader = open(path)?;
    let names = header(&mut reader, path)?;
    let expected = schema.names();
    if names != expected {
        let missing: Vec<&str> = expected
            .iter()
            .filter(|n| !names.iter().any(|h| h == *n))
            .copied()
            .collect();
        let extra: Vec<&str> = names
            .iter()
            .filter(|h| !expected.contains(&h.as_str()))
            .map(String::as_str)
            .collect();
        return Err(Error::Validation(format!(
            "{}: header does not match schema (missing: {missing:?}, unexpected: {extra:?})",
            path.display()
        )));
    }
    read_rows(reader, path, schema, None)
}

/// Reads the conditional columns (by name) of a CSV, in schema order.
/// Other columns are ignored.
pub fn read_conditionals(path: &Path, schema: &Schema) -> Result<Vec<Vec<usize>>> {
    let mut reader = open(path)?;
    let names = header(&mut reader, path)?;
    let mut columns = Vec::with_capacity(schema.n_conditionals());
    for f in schema.conditionals() {
        let col = names.iter().position(|h| *h == f.name).ok_or_else(|| {
            Error::Validation(format!(
                "{}: missing conditional column `{}`",
                path.display(),
                f.name
            ))
        })?;
        columns.push(col);
    }
    let rows = read_rows(reader, path, schema, Some(&columns))?;
    Ok(rows.into_iter().map(|r| r.0).collect())
}

fn read_rows(
    mut reader: csv::Reader<std::fs::File>,
    path: &Path,
    schema: &Schema,
    columns: Option<&[usize]>,
) -> Result<Vec<AgentRecord>> {
    let features = match columns {
        Some(_) => schema.conditionals(),
        None => &schema.features[..],
    };
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let row = row.map_err(|e| csv_err(path, format!("line {line}: {e}")))?;
        let width = columns.map_or(features.len(), |_| row.len());
        if row.len() != width {
            return Err(csv_err(
                path,
                format!("line {line}: expected {width} fields, found {}", row.len()),
            ));
        }
        let mut values = Vec::with_capacity(features.len());
        for (j, f) in features.iter().enumerate() {
            let col = columns.map_or(j, |c| c[j]);
            let raw = row.get(col).unwrap_or("").trim();
            let v: usize = raw.parse().map_err(|_| {
                csv_err(
                    path,
                    format!(
                        "line {line}: `{}` value `{raw}` is not a category index",
                        f.name
                    ),
                )
            })?;
            if v >= f.len() {
                return Err(csv_err(
                    path,
                    format!(
                        "line {line}: `{}` index {v} out of range 0..{}",
                        f.name,
                        f.len()
                    ),
                ));
            }
            values.push(v);
        }
        out.push(AgentRecord(values));
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, schema: &Schema, records: &[AgentRecord]) -> Result<()> {
    let mut text = String::with_capacity(records.len() * schema.len() * 3 + 128);
    text.push_str(&schema.names().join(","));
    text.push('\n');
    for r in records {
        let row: Vec<String> = r.0.iter().map(usize::to_string).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
