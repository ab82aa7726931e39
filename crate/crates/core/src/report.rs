//! Tabular output: the seven result tables as CSV or aligned text, with
//! fixed file names and headers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Text,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Text => "txt",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "text" | "txt" => Ok(Format::Text),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}` (csv or text)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(usize),
    /// Not computed (e.g. bootstrap skipped); rendered empty.
    Blank,
    /// Deliberately withheld; rendered `NA`.
    Na,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Blank, Cell::Num)
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => format_g6(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Blank => String::new(),
            Cell::Na => "NA".into(),
        }
    }
}

/// `%g` with six significant digits.
pub fn format_g6(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Significance stars: * p < .05, ** p < .01, *** p < .001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `table1_reliability`.
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &'static str, header: impl IntoIterator<Item = S>) -> Self {
        Self {
            name,
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("{}.{}", self.name, format.extension())
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Text => self.render_text(),
        }
    }

    fn render_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    fn render_text(&self) -> String {
        let cells: Vec<Vec<String>> = std::iter::once(self.header.clone())
            .chain(self.rows.iter().map(|r| r.iter().map(Cell::render).collect()))
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| cells.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| {
                    // first column left-aligned, the rest right-aligned
                    if j == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
                writeln!(out, "{}", "-".repeat(total)).unwrap();
            }
        }
        out
    }

    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        let path = dir.join(self.file_name(format));
        std::fs::write(&path, self.render(format)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_formatting() {
        assert_eq!(format_g6(0.916), "0.916");
        assert_eq!(format_g6(1.0), "1");
        assert_eq!(format_g6(-0.09500004), "-0.095");
        assert_eq!(format_g6(123456789.0), "1.23457e+08");
        assert_eq!(format_g6(0.000012345678), "1.23457e-05");
        assert_eq!(format_g6(0.00012345678), "0.000123457");
        assert_eq!(format_g6(99999.96), "100000");
        assert_eq!(format_g6(999999.5), "1e+06");
        assert_eq!(format_g6(0.0), "0");
        assert_eq!(format_g6(2.0 / 3.0), "0.666667");
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.0008), "***");
        assert_eq!(stars(0.005), "**");
        assert_eq!(stars(0.02), "*");
        assert_eq!(stars(0.06), "");
        assert_eq!(stars(0.05), "");
    }

    #[test]
    fn text_columns_align() {
        let mut t = Table::new("t", vec!["name", "value"]);
        t.push(vec![Cell::text("a"), Cell::Num(1.5)]);
        t.push(vec![Cell::text("longer"), Cell::Num(-12.25)]);
        let s = t.render(Format::Text);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "name     value");
        assert_eq!(lines[1], "--------------");
        assert_eq!(lines[2], "a          1.5");
        assert_eq!(lines[3], "longer  -12.25");
    }

    #[test]
    fn csv_quotes_when_needed() {
        let mut t = Table::new("t", vec!["a", "b"]);
        t.push(vec![Cell::text("x, y"), Cell::Blank]);
        assert_eq!(t.render(Format::Csv), "a,b\n\"x, y\",\n");
    }
}
