//! `FiniteMeasure` CSV files: header `x_1,…,x_d,weight`, one atom per row.

use std::path::Path;

use limitlab_core::metrics::FiniteMeasure;

use crate::error::{io_err, LabError, Result};

/// Total weight may differ from 1 by at most this much before renormalisation.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

fn bad(path: &Path, message: impl Into<String>) -> LabError {
    LabError::Measure { path: path.to_path_buf(), message: message.into() }
}

/// Parses measure CSV text; `origin` only labels errors.
pub fn parse_measure(text: &str, origin: &Path) -> Result<FiniteMeasure> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols.last() != Some(&"weight") {
        return Err(bad(origin, "header must be x_1,…,x_d,weight"));
    }
    let d = cols.len() - 1;
    for (i, c) in cols[..d].iter().enumerate() {
        if *c != format!("x_{}", i + 1) {
            return Err(bad(origin, format!("column {} is `{c}`, expected `x_{}`", i + 1, i + 1)));
        }
    }
    let (mut atoms, mut weights) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(bad(origin, format!("row {} has {} fields, expected {}", row + 1, rec.len(), d + 1)));
        }
        let mut vals = Vec::with_capacity(d + 1);
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| bad(origin, format!("row {}: `{field}` is not a number", row + 1)))?;
            if !v.is_finite() {
                return Err(bad(origin, format!("row {}: non-finite value", row + 1)));
            }
            vals.push(v);
        }
        let w = vals.pop().expect("row has a weight");
        if w < 0.0 {
            return Err(bad(origin, format!("row {}: negative weight", row + 1)));
        }
        atoms.extend(vals);
        weights.push(w);
    }
    if weights.is_empty() {
        return Err(bad(origin, "no atoms"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(bad(origin, format!("weights sum to {total}, not 1 within {WEIGHT_SUM_TOL:e}")));
    }
    let weights = weights.iter().map(|w| w / total).collect();
    FiniteMeasure::new(d, atoms, weights).map_err(|e| bad(origin, e.to_string()))
}

pub fn read_measure(path: &Path) -> Result<FiniteMeasure> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_measure(&text, path)
}

pub fn write_measure(m: &FiniteMeasure, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=m.dim()).map(|i| format!("x_{i}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for i in 0..m.len() {
        let mut row: Vec<String> = m.atom(i).iter().map(|v| v.to_string()).collect();
        row.push(m.weights()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
