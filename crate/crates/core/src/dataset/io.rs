use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

/// Reads a comma- or tab-separated numeric matrix.
///
/// The delimiter is whichever of `,` and `\t` occurs more often on the first
/// non-empty line. The first row is a header when any of its cells fails to
/// parse as a number. Row ids are the zero-based data-row indices.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

pub fn parse_matrix(text: &str) -> Result<PointCloud> {
    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = if first_line.matches('\t').count() > first_line.matches(',').count() {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut n_rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::Parse {
                    row: line,
                    column: record.len().min(w),
                    message: format!("ragged row: {} cells, expected {w}", record.len()),
                });
            }
        } else {
            width = Some(record.len());
            if record.iter().any(|c| c.parse::<f64>().is_err()) {
                header = Some(record.iter().map(str::to_string).collect());
                continue;
            }
        }
        for (column, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(value);
        }
        n_rows += 1;
    }
    let dim = width.unwrap_or(0);
    if n_rows == 0 {
        return Err(Error::InvalidInput("matrix has no data rows".into()));
    }
    let column_names = header.unwrap_or_else(|| (0..dim).map(|j| format!("x{j}")).collect());
    let row_ids = (0..n_rows).map(|i| i.to_string()).collect();
    PointCloud::with_labels(data, n_rows, dim, column_names, row_ids)
}

/// Writes `pc` as comma-separated text with a header row. Values use the
/// shortest representation that parses back to the identical `f64`.
pub fn save_matrix(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix(pc, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_matrix(pc: &PointCloud, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", pc.column_names().join(","))?;
    for row in pc.rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}
