//! Comma-separated series files.
//!
//! One row per time step and one column per channel, with an optional header
//! row and an optional timestamp column that is skipped on load. Values are
//! written with 12 significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use kansr_core::ingest::{default_channel_names, SeriesMatrix};
use kansr_core::Matrix;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// 0-based column holding timestamps, ignored on load.
    pub timestamp_column: Option<usize>,
}

pub fn load_csv(path: &Path, options: CsvOptions) -> Result<SeriesMatrix> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, options)
}

/// Parses a series from any reader. Row and column numbers in errors are
/// 1-based positions in the file, header included.
pub fn read_csv<R: Read>(reader: R, options: CsvOptions) -> Result<SeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| CliError::Parse {
            row: line,
            col: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => return Err(CliError::RaggedRows(line)),
            Some(_) => {}
        }
        if let Some(ts) = options.timestamp_column {
            if ts >= record.len() {
                return Err(CliError::Config(format!(
                    "timestamp column {ts} is out of range for {} fields",
                    record.len()
                )));
            }
        }
        let fields = record
            .iter()
            .enumerate()
            .filter(|(c, _)| Some(*c) != options.timestamp_column);
        if options.has_header && names.is_none() {
            names = Some(fields.map(|(_, f)| f.to_string()).collect());
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in fields {
            let value: f64 = field.parse().map_err(|_| CliError::Parse {
                row: line,
                col: c + 1,
                message: if field.is_empty() {
                    "blank cell".to_string()
                } else {
                    format!("not a number: {field:?}")
                },
            })?;
            if !value.is_finite() {
                return Err(CliError::Parse {
                    row: line,
                    col: c + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::EmptyInput);
    }
    let values = Matrix::from_rows(&rows)?;
    let names = names.unwrap_or_else(|| default_channel_names(values.cols()));
    Ok(SeriesMatrix::new(values, names)?)
}

pub fn save_csv(path: &Path, series: &SeriesMatrix, write_header: bool) -> Result<()> {
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut buf = Vec::new();
    write_csv(
        &mut buf,
        series.values(),
        series.channel_names(),
        write_header,
    )?;
    file.write_all(&buf).map_err(|e| CliError::io(path, e))
}

pub fn write_csv<W: Write>(
    writer: W,
    values: &Matrix,
    names: &[String],
    write_header: bool,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let fail = |e: csv::Error| CliError::Config(format!("csv write failed: {e}"));
    if write_header {
        wtr.write_record(names).map_err(fail)?;
    }
    for i in 0..values.rows() {
        wtr.write_record(values.row(i).iter().map(|&v| format_sig12(v)))
            .map_err(fail)?;
    }
    wtr.flush()
        .map_err(|e| CliError::Config(format!("csv write failed: {e}")))
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros trimmed.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
