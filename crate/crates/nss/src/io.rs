//! Dataset CSV files: header row, comma separated, decimal numbers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nss_core::Dataset;

use crate::error::{Error, Result};

/// Column selection for `load_csv`; `None` picks `u0, u1, ...` and `y0, y1, ...`
/// from the header in index order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Columns {
    pub u: Option<Vec<String>>,
    pub y: Option<Vec<String>>,
}

impl Columns {
    pub fn new(u: &[&str], y: &[&str]) -> Self {
        let own = |c: &[&str]| Some(c.iter().map(|s| s.to_string()).collect());
        Self { u: own(u), y: own(y) }
    }
}

fn indexed_columns(header: &csv::StringRecord, prefix: char) -> Vec<String> {
    let mut found: Vec<(usize, String)> = header
        .iter()
        .filter_map(|h| {
            let rest = h.strip_prefix(prefix)?;
            let idx = rest.parse::<usize>().ok()?;
            Some((idx, h.to_string()))
        })
        .collect();
    found.sort();
    // only the contiguous run u0, u1, ... counts
    found.iter().enumerate().take_while(|(i, (idx, _))| i == idx).map(|(_, (_, h))| h.clone()).collect()
}

fn locate(header: &csv::StringRecord, names: &[String], path: &Path) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn { path: path.into(), column: name.clone() })
        })
        .collect()
}

/// Reads a dataset, preserving row order. The dataset is named after the file stem.
pub fn load_csv(path: impl AsRef<Path>, columns: &Columns) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let u_names = columns.u.clone().unwrap_or_else(|| indexed_columns(&header, 'u'));
    let y_names = columns.y.clone().unwrap_or_else(|| indexed_columns(&header, 'y'));
    if u_names.is_empty() {
        return Err(Error::MissingColumn { path: path.into(), column: "u0".into() });
    }
    if y_names.is_empty() {
        return Err(Error::MissingColumn { path: path.into(), column: "y0".into() });
    }
    let u_idx = locate(&header, &u_names, path)?;
    let y_idx = locate(&header, &y_names, path)?;

    let (mut u, mut y) = (Vec::new(), Vec::new());
    for (r, record) in reader.records().enumerate() {
        // csv rejects rows whose field count differs from the header
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = r + 1;
        for (idx, names, out) in [(&u_idx, &u_names, &mut u), (&y_idx, &y_names, &mut y)] {
            for (&i, name) in idx.iter().zip(names) {
                let cell = &record[i];
                let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                    path: path.into(),
                    row,
                    column: name.clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::BadCell { path: path.into(), row, column: name.clone(), value: cell.to_string() });
                }
                out.push(v);
            }
        }
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Dataset::new(name, u_names.len(), y_names.len(), u, y)?)
}

/// 17 significant digits, enough for every finite `f64` to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `u0.., y0..` columns with 17 significant digits.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let header: Vec<String> = (0..data.n_u()).map(|i| format!("u{i}")).chain((0..data.n_y()).map(|i| format!("y{i}"))).collect();
    let mut text = header.join(",");
    text.push('\n');
    for k in 0..data.len() {
        let row: Vec<String> = data.u_rows(k, 1).iter().chain(data.y_rows(k, 1)).map(|&v| fmt_f64(v)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
