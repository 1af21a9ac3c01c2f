//! CSV tables with fixed headers.

use std::path::Path;

use crate::error::Result;

/// One output CSV and how the plot script should chart it.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub chart: Option<Chart>,
}

/// A chart of column `y` against column `x`, one line per value of `group`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub x: &'static str,
    pub y: &'static str,
    pub group: Option<&'static str>,
    pub log_x: bool,
    pub log_y: bool,
    pub title: String,
}

impl Chart {
    pub fn loglog(x: &'static str, y: &'static str, group: Option<&'static str>, title: impl Into<String>) -> Self {
        Self { x, y, group, log_x: true, log_y: true, title: title.into() }
    }
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Self { file: file.into(), header: header.to_vec(), rows: Vec::new(), chart: None }
    }

    pub fn with_chart(mut self, chart: Chart) -> Self {
        self.chart = Some(chart);
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header of {}", self.file);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(crate::error::io_err(dir.join(&self.file)))?;
        Ok(())
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}
