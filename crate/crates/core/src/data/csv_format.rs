// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV interchange: `label,score,x_0..x_{n-1},xp_0..xp_{n-1}`.
//!
//! `label` is `0`, `1` or blank (unlabeled); `score` is blank when absent.

use std::path::Path;

use super::lage::stem;
use super::{EmbeddingPairSet, Label, PairRecord};
use crate::error::{Error, Result};

pub(super) fn write(set: &EmbeddingPairSet, path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(set.dim())).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(2 + 2 * set.dim());
    for r in set.records() {
        row.clear();
        row.push(match r.label {
            Label::Positive => "1".into(),
            Label::Negative => "0".into(),
            Label::Unlabeled => String::new(),
        });
        row.push(r.raw_score.map(|s| s.to_string()).unwrap_or_default());
        row.extend(r.x.iter().chain(&r.x_prime).map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub(super) fn read(path: &Path) -> Result<EmbeddingPairSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let head = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let fields: Vec<&str> = head.iter().collect();
    if fields.len() < 2
        || fields[0] != "label"
        || fields[1] != "score"
        || !fields.len().is_multiple_of(2)
    {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "header must be label,score,x_0..,xp_0..".into(),
        });
    }
    let dim = (fields.len() - 2) / 2;
    let want = header(dim);
    if fields != want.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected column names for dimension {dim}"),
        });
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let bad = |message: String| Error::Record {
            path: path.to_path_buf(),
            record: i,
            message,
        };
        if row.len() != 2 + 2 * dim {
            return Err(bad(format!(
                "row has {} embedding entries, expected {} ({} per vector)",
                row.len().saturating_sub(2),
                2 * dim,
                dim
            )));
        }
        let label = match row[0].trim() {
            "" => Label::Unlabeled,
            "1" => Label::Positive,
            "0" => Label::Negative,
            other => return Err(bad(format!("invalid label {other:?}"))),
        };
        let raw_score = match row[1].trim() {
            "" => None,
            s => {
                let v: f32 = s.parse().map_err(|_| bad(format!("invalid score {s:?}")))?;
                if !v.is_finite() {
                    return Err(bad("non-finite score".into()));
                }
                Some(v)
            }
        };
        let mut values = Vec::with_capacity(2 * dim);
        for (j, cell) in row.iter().skip(2).enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| bad(format!("column {} is not a number: {cell:?}", want[j + 2])))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value in column {}", want[j + 2])));
            }
            values.push(v);
        }
        let x_prime = values.split_off(dim);
        records.push(PairRecord {
            label,
            x: values,
            x_prime,
            raw_score,
        });
    }
    EmbeddingPairSet::new(stem(path), dim, records)
}

fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["label".to_string(), "score".to_string()];
    h.extend((0..dim).map(|j| format!("x_{j}")));
    h.extend((0..dim).map(|j| format!("xp_{j}")));
    h
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}
