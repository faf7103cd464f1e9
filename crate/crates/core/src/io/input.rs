//! CSV ingestion.
//!
//! A cohort file has a header naming `id`, `treatment`, `time` and `event`;
//! every other column is a numeric covariate, taken in file order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{build_cohort, Cohort, RawRow};

use super::report::format_number;

const REQUIRED: [&str; 4] = ["id", "treatment", "time", "event"];

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    } else {
        Error::Format(e.to_string())
    }
}

fn parse_field<T: std::str::FromStr>(value: &str, column: &str, row: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Validation {
        row,
        message: format!("cannot parse `{value}` in column `{column}`"),
    })
}

/// Reads raw rows from any CSV source with the cohort header.
pub fn read_rows<R: std::io::Read>(reader: R) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    parse_rows(&mut reader)
}

fn parse_rows<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<Vec<RawRow>> {
    let header = reader.headers().map_err(csv_error)?.clone();
    let position = |name: &str| header.iter().position(|h| h == name);
    let mut index = [0usize; 4];
    for (slot, name) in index.iter_mut().zip(REQUIRED) {
        *slot = position(name).ok_or_else(|| Error::Format(format!("missing column `{name}`")))?;
    }
    let covariate_columns: Vec<usize> = (0..header.len()).filter(|c| !index.contains(c)).collect();
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Error::Validation {
                row,
                message: "inconsistent column count".into(),
            },
            _ => csv_error(e),
        })?;
        let covariates = covariate_columns
            .iter()
            .map(|&c| {
                let v = &record[c];
                if v.is_empty() || v.eq_ignore_ascii_case("na") {
                    Ok(f64::NAN)
                } else {
                    parse_field(v, &header[c], row)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(RawRow {
            id: record[index[0]].to_string(),
            treatment: parse_field(&record[index[1]], "treatment", row)?,
            time: parse_field(&record[index[2]], "time", row)?,
            event: parse_field(&record[index[3]], "event", row)?,
            covariates,
        });
    }
    Ok(rows)
}

/// Loads and validates a cohort. Without `n_events`, the number of event
/// types is the largest event code present (at least 1).
pub fn read_cohort(path: &Path, n_events: Option<usize>) -> Result<Cohort> {
    let rows = parse_rows(&mut open(path)?)?;
    let n_events = n_events.unwrap_or_else(|| rows.iter().map(|r| r.event.max(0) as usize).max().unwrap_or(0).max(1));
    build_cohort(&rows, n_events)
}

/// Reads one score per line, with or without a header line.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut scores = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.len() != 1 {
            return Err(Error::Validation {
                row: k + 1,
                message: format!("expected one column of scores, found {}", record.len()),
            });
        }
        match record[0].parse::<f64>() {
            Ok(v) => scores.push(v),
            Err(_) if k == 0 => continue,
            Err(_) => {
                return Err(Error::Validation {
                    row: k + 1,
                    message: format!("cannot parse score `{}`", &record[0]),
                })
            }
        }
    }
    Ok(scores)
}

/// Writes a cohort in the layout `read_cohort` accepts, naming covariates
/// `x1`, `x2`, ...
pub fn write_cohort<W: std::io::Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = REQUIRED.iter().map(|s| s.to_string()).collect();
    header.extend((1..=cohort.p()).map(|k| format!("x{k}")));
    out.write_record(&header).map_err(csv_error)?;
    for s in cohort.subjects() {
        let mut record = vec![
            s.id.clone(),
            s.treatment.indicator().to_string(),
            format_number(s.time),
            s.event.to_string(),
        ];
        record.extend(s.covariates.iter().map(|&x| format_number(x)));
        out.write_record(&record).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}
