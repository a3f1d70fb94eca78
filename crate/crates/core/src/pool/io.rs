use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{AttrValue, Instance, Pool};
use crate::error::{Error, Result};

/// Column names used when reading a pool file.
#[derive(Debug, Clone)]
pub struct Schema {
    pub id: String,
    pub score: String,
    pub pred_label: String,
    pub true_label: String,
    /// Columns starting with this prefix become stratification attributes.
    pub attr_prefix: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "id".into(),
            score: "score".into(),
            pred_label: "pred_label".into(),
            true_label: "true_label".into(),
            attr_prefix: "attr_".into(),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn load_pool(path: impl AsRef<Path>, schema: &Schema) -> Result<Pool> {
    read_pool(open(path.as_ref())?, schema)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    name: &str,
    row: usize,
    expected: &'static str,
) -> Result<T> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::Parse {
        row,
        column: name.to_string(),
        value: raw.to_string(),
        expected,
    })
}

pub fn read_pool<R: Read>(reader: R, schema: &Schema) -> Result<Pool> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyPool);
    }
    let id_col = column(&headers, &schema.id)?;
    let score_col = column(&headers, &schema.score)?;
    let pred_col = column(&headers, &schema.pred_label)?;
    let true_col = column(&headers, &schema.true_label).ok();
    let attr_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix(schema.attr_prefix.as_str())
                .filter(|name| !name.is_empty())
                .map(|name| (i, name.to_string()))
        })
        .collect();

    let mut instances = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let id: u64 = parse_field(&record, id_col, &schema.id, row, "non-negative integer id")?;
        let score: f64 = parse_field(&record, score_col, &schema.score, row, "number")?;
        if !score.is_finite() {
            return Err(Error::Parse {
                row,
                column: schema.score.clone(),
                value: record.get(score_col).unwrap_or("").to_string(),
                expected: "number",
            });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::ScoreOutOfRange { row, id, score });
        }
        let pred_label: i64 =
            parse_field(&record, pred_col, &schema.pred_label, row, "integer label")?;
        let mut inst = Instance::new(id, score, pred_label);
        if let Some(col) = true_col {
            if !record.get(col).unwrap_or("").trim().is_empty() {
                inst.true_label =
                    Some(parse_field(&record, col, &schema.true_label, row, "integer label")?);
            }
        }
        for (col, name) in &attr_cols {
            if let Some(value) = record.get(*col).and_then(AttrValue::parse) {
                inst.attrs.insert(name.clone(), value);
            }
        }
        instances.push(inst);
    }
    Pool::new(instances)
}

/// Writes a pool in the canonical layout read by [`read_pool`] with the
/// default schema: `id,score,pred_label[,true_label][,attr_*]`.
pub fn write_pool<W: Write>(pool: &Pool, writer: W) -> Result<()> {
    let attr_names: BTreeSet<&str> = pool
        .instances()
        .iter()
        .flat_map(|i| i.attrs.keys().map(String::as_str))
        .collect();
    let has_truth = pool.instances().iter().any(|i| i.true_label.is_some());

    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "score".into(), "pred_label".into()];
    if has_truth {
        header.push("true_label".into());
    }
    header.extend(attr_names.iter().map(|n| format!("attr_{n}")));
    wtr.write_record(&header)?;

    for inst in pool.instances() {
        let mut rec = vec![
            inst.id.to_string(),
            inst.score.to_string(),
            inst.pred_label.to_string(),
        ];
        if has_truth {
            rec.push(inst.true_label.map(|y| y.to_string()).unwrap_or_default());
        }
        for name in &attr_names {
            rec.push(inst.attrs.get(*name).map(|v| v.to_string()).unwrap_or_default());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<pool writer>", e))?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<HashMap<u64, i64>> {
    read_labels(open(path.as_ref())?)
}

/// Reads an external label table with columns `id,true_label`.
pub fn read_labels<R: Read>(reader: R) -> Result<HashMap<u64, i64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, "id")?;
    let label_col = column(&headers, "true_label")?;
    let mut labels = HashMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        let id: u64 = parse_field(&record, id_col, "id", row, "non-negative integer id")?;
        let label: i64 = parse_field(&record, label_col, "true_label", row, "integer label")?;
        if labels.insert(id, label).is_some_and(|prev| prev != label) {
            return Err(Error::DuplicateId { row, id });
        }
    }
    Ok(labels)
}
