//! CSV and JSON reports.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Format, StudyReport, StudyRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = ["alpha", "delta", "P", "N", "l2_error", "h1_error", "l2_rate", "h1_rate"];

/// Shortest round-trip scientific form, padded to at least six significant digits.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:e}");
    let (mantissa, exponent) = s.split_once('e').unwrap_or((&s, "0"));
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    format!("{int}.{frac:0<5}e{exponent}")
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_sci).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<W: Write>(report: &StudyReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in &report.rows {
        w.write_record([
            format!("{}", row.alpha),
            format!("{}", row.delta),
            row.subdivisions.to_string(),
            row.steps.to_string(),
            opt_cell(row.l2_error),
            opt_cell(row.h1_error),
            opt_cell(row.l2_rate),
            opt_cell(row.h1_rate),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a CSV report. Rate parameters and failure messages are not part of the CSV.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<StudyRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Io(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Io(format!("cannot parse {s:?} as a number")))
    };
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    let int = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Io(format!("cannot parse {s:?} as an integer")))
    };
    let mut rows = Vec::new();
    for record in r.records() {
        let rec = record.map_err(csv_err)?;
        let mut row = StudyRow::new(num(&rec[0])?, num(&rec[1])?, int(&rec[2])?, int(&rec[3])?);
        row.l2_error = opt(&rec[4])?;
        row.h1_error = opt(&rec[5])?;
        row.l2_rate = opt(&rec[6])?;
        row.h1_rate = opt(&rec[7])?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_json<W: Write>(report: &StudyReport, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<R: Read>(reader: R) -> Result<StudyReport> {
    serde_json::from_reader(reader).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_report(report: &StudyReport, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    match format {
        Format::Csv => write_csv(report, BufWriter::new(file)),
        Format::Json => write_json(report, file),
    }
}
