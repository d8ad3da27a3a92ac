//! CSV ingest and export.
//!
//! Columns: `id`, `f0..f{d-1}`, `label` (0/1), optional `e1..e{n}` votes on the five-point grid,
//! optional `p_true` (synthetic posterior).

use std::path::Path;

use super::example::{Dataset, Example, Vote};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const ORACLE_COLUMN: &str = "p_true";

/// Column names to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub id: String,
    pub features: Vec<String>,
    pub label: String,
    pub votes: Vec<String>,
    pub oracle: Option<String>,
}

impl CsvSchema {
    /// Schema following the default naming: `f<i>` features, `e<k>` votes.
    pub fn infer(headers: &[&str]) -> Result<Self> {
        let numbered = |prefix: char, start: usize| -> Vec<String> {
            (start..)
                .map(|i| format!("{prefix}{i}"))
                .take_while(|name| headers.contains(&name.as_str()))
                .collect()
        };
        let features = numbered('f', 0);
        if features.is_empty() {
            return Err(Error::input("no feature columns `f0..` in header"));
        }
        Ok(Self {
            id: "id".into(),
            features,
            label: "label".into(),
            votes: numbered('e', 1),
            oracle: headers.contains(&ORACLE_COLUMN).then(|| ORACLE_COLUMN.to_string()),
        })
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::input(format!("header has no column `{name}`")))
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Loads a dataset, inferring the schema from the header.
pub fn load_csv_auto<T: Real>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let schema = CsvSchema::infer(&names)?;
    read_rows(reader, &headers, &schema)
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    read_rows(reader, &headers, schema)
}

fn read_rows<T: Real, R: std::io::Read>(
    mut reader: csv::Reader<R>,
    headers: &csv::StringRecord,
    schema: &CsvSchema,
) -> Result<Dataset<T>> {
    let id_col = column(headers, &schema.id)?;
    let label_col = column(headers, &schema.label)?;
    let feature_cols = schema
        .features
        .iter()
        .map(|n| column(headers, n))
        .collect::<Result<Vec<_>>>()?;
    let vote_cols = schema
        .votes
        .iter()
        .map(|n| column(headers, n))
        .collect::<Result<Vec<_>>>()?;
    let oracle_col = schema.oracle.as_deref().map(|n| column(headers, n)).transpose()?;

    let mut examples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");

        let id = field(id_col).to_string();
        if id.is_empty() {
            return Err(Error::Validation { row, message: "missing id".into() });
        }
        let label = match field(label_col) {
            "0" => false,
            "1" => true,
            "" => return Err(Error::Validation { row, message: "missing label".into() }),
            other => {
                return Err(Error::Validation {
                    row,
                    message: format!("label `{other}` is not 0 or 1"),
                })
            }
        };
        let features = feature_cols
            .iter()
            .zip(&schema.features)
            .map(|(&c, name)| {
                field(c)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .and_then(T::from_f64)
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: name.clone(),
                        message: format!("`{}` is not a finite number", field(c)),
                    })
            })
            .collect::<Result<Vec<T>>>()?;

        let cells: Vec<&str> = vote_cols.iter().map(|&c| field(c)).collect();
        let expert_votes = if cells.iter().all(|c| c.is_empty()) {
            None
        } else {
            let votes = cells
                .iter()
                .map(|cell| {
                    cell.parse::<f64>().ok().and_then(Vote::from_value).ok_or_else(|| {
                        Error::Validation {
                            row,
                            message: format!(
                                "vote `{cell}` is not on the grid 0.00/0.25/0.50/0.75/1.00"
                            ),
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(votes)
        };

        let true_positive_prob = match oracle_col.map(field) {
            None | Some("") => None,
            Some(cell) => Some(
                cell.parse::<f64>()
                    .ok()
                    .filter(|p| (0.0..=1.0).contains(p))
                    .and_then(T::from_f64)
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: ORACLE_COLUMN.into(),
                        message: format!("`{cell}` is not a probability"),
                    })?,
            ),
        };

        examples.push(Example {
            id,
            features,
            label,
            expert_votes,
            true_positive_prob,
        });
    }
    Dataset::new(examples)
}

/// Writes `dataset` with the default column naming. Output is a pure function of the data.
pub fn write_csv<T: Real>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(dataset, file)
}

pub fn csv_columns<T: Real>(dataset: &Dataset<T>) -> Vec<String> {
    let n_votes = dataset
        .examples()
        .iter()
        .filter_map(|e| e.expert_votes.as_ref().map(Vec::len))
        .max()
        .unwrap_or(0);
    let mut header = vec!["id".to_string()];
    header.extend((0..dataset.n_features()).map(|i| format!("f{i}")));
    header.push("label".into());
    header.extend((1..=n_votes).map(|k| format!("e{k}")));
    if dataset.examples().iter().any(|e| e.true_positive_prob.is_some()) {
        header.push(ORACLE_COLUMN.into());
    }
    header
}

pub fn write_csv_to<T: Real, W: std::io::Write>(dataset: &Dataset<T>, out: W) -> Result<()> {
    let header = csv_columns(dataset);
    let n_votes = header.iter().filter(|h| h.starts_with('e')).count();
    let with_oracle = header.last().is_some_and(|h| h == ORACLE_COLUMN);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    let num = |v: T| v.to_f64().expect("real converts to f64").to_string();
    for ex in dataset.examples() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(ex.id.clone());
        rec.extend(ex.features.iter().map(|&v| num(v)));
        rec.push(if ex.label { "1" } else { "0" }.to_string());
        match &ex.expert_votes {
            Some(v) if v.len() == n_votes => rec.extend(v.iter().map(Vote::to_string)),
            Some(_) => {
                return Err(Error::input(format!(
                    "example `{}` has a different number of votes than the rest",
                    ex.id
                )))
            }
            None => rec.extend(std::iter::repeat_n(String::new(), n_votes)),
        }
        if with_oracle {
            rec.push(ex.true_positive_prob.map(num).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
