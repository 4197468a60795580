//! CSV plumbing shared by every artifact writer.
//!
//! Floats are written with 12 significant digits in a fixed scientific
//! format so reruns are byte-identical.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// 12 significant digits, scientific notation; `-0` is written as `0`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000e0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    format!("{x:.11e}")
}

/// Round `x` to the value its 12-digit CSV representation parses back to.
pub fn round_sig12(x: f64) -> f64 {
    fmt_f64(x).parse().unwrap_or(x)
}

pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new<S: AsRef<str>>(mut out: W, header: &[S]) -> io::Result<Self> {
        let line: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        writeln!(out, "{}", line.join(","))?;
        Ok(Self { out, columns: header.len() })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        writeln!(self.out, "{}", line.join(","))
    }

    /// Free-form trailing line (used for `#`-prefixed footers).
    pub fn raw_line(&mut self, line: &str) -> io::Result<()> {
        writeln!(self.out, "{line}")
    }
}

/// Create parent directories and write `path` through a buffered writer.
pub fn write_file<F>(path: &Path, body: F) -> io::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()
}

/// Parsed CSV table: header plus rows of raw fields. Lines starting with
/// `#` are returned separately as footer lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub comments: Vec<String>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn f64_column(&self, name: &str) -> io::Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("missing column {name}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{name}: {e}")))
            })
            .collect()
    }
}

pub fn read_csv(path: &Path) -> io::Result<CsvTable> {
    parse_csv(&fs::read_to_string(path)?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<CsvTable, String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    let mut comments = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.starts_with('#') {
            comments.push(line.to_string());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(format!("line {}: expected {} fields, got {}", i + 2, header.len(), fields.len()));
        }
        rows.push(fields);
    }
    Ok(CsvTable { header, rows, comments })
}
