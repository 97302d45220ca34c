//! CSV ingestion and output.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numeric::format_sig17;

/// Reads the first two columns of a comma-separated file as numbers.
///
/// The first record is skipped as a header when none of its fields parse as
/// numbers. Any other non-numeric cell in the first two columns is an error
/// naming its 1-based row and column.
pub fn read_xy(input: impl Read) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 1,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row == 1 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                column: record.len() + 1,
                message: "expected at least two columns".into(),
            });
        }
        let cell = |column: usize| -> Result<f64> {
            let text = &record[column - 1];
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column,
                    message: format!("`{text}` is not a finite number"),
                }),
            }
        };
        xs.push(cell(1)?);
        ys.push(cell(2)?);
    }
    if xs.len() < 2 {
        return Err(Error::Parse {
            row: xs.len() + 1,
            column: 1,
            message: format!("need at least 2 data rows, found {}", xs.len()),
        });
    }
    Ok((xs, ys))
}

/// Writes `u,v` rows with 17 significant digits under a `u,v` header.
pub fn write_uv(mut out: impl Write, pairs: &[(f64, f64)]) -> Result<()> {
    writeln!(out, "u,v")?;
    for (u, v) in pairs {
        writeln!(out, "{},{}", format_sig17(*u), format_sig17(*v))?;
    }
    Ok(())
}
