//! Matrix persistence: RFC-4180 CSV with 17 significant digits, and the
//! `RPCA` binary container (magic, `u32` rows, `u32` cols, little-endian
//! `f64` row-major).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const RPCA_MAGIC: &[u8; 4] = b"RPCA";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes rows of numbers under an optional header.
pub fn write_rows_csv<W: Write>(out: W, header: Option<&[String]>, rows: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|&v| format_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes each matrix row as a CSV record.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    write_rows_csv(BufWriter::new(file), header, &rows).map_err(|e| csv_err(path, e))
}

/// Reads a numeric CSV; returns the header (if `has_header`) and the matrix.
pub fn read_matrix_csv(path: &Path, has_header: bool) -> Result<(Option<Vec<String>>, DMatrix<f64>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .from_reader(BufReader::new(file));
    let header: Option<Vec<String>> = if has_header {
        Some(r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect())
    } else {
        None
    };
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse(format!("{}: ragged rows", path.display())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad number {field:?}", path.display())))?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or_else(|| header.as_ref().map_or(0, |h| h.len()));
    Ok((header, DMatrix::from_row_slice(rows, cols, &data)))
}

pub fn encode_rpca(m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::InvalidInput("too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::InvalidInput("too many columns".into()))?;
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(RPCA_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for i in 0..m.nrows() {
        for v in m.row(i).iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_rpca(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 12 || &bytes[..4] != RPCA_MAGIC {
        return Err(Error::Parse("missing RPCA header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 8 * rows * cols {
        return Err(Error::Parse(format!(
            "RPCA body has {} bytes, expected {}",
            body.len(),
            8 * rows * cols
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_rpca(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let bytes = encode_rpca(m)?;
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&bytes).map_err(|e| io_err(path, e))
}

pub fn read_rpca(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    decode_rpca(&bytes)
}
