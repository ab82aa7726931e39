//! Survey indicator data: CSV ingestion, listwise screening, and
//! z-score standardization.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Raw case-by-indicator matrix. Missing cells are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    n_rows: usize,
    // row-major
    values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row vectors; non-finite values are treated as missing.
    pub fn from_rows(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_header(&columns)?;
        let p = columns.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: p,
                    found: row.len(),
                });
            }
            values.extend(row.iter().map(|v| if v.is_finite() { *v } else { f64::NAN }));
        }
        Ok(Self {
            columns,
            n_rows: rows.len(),
            values,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_cases(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell value, `None` when missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * self.columns.len() + col];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_none()
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let p = self.columns.len();
        &self.values[row * p..(row + 1) * p]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.values[r * self.columns.len() + col]).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

fn validate_header(columns: &[String]) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::BadHeader {
            column: 0,
            message: "no columns".into(),
        });
    }
    let mut seen = HashSet::new();
    for (i, c) in columns.iter().enumerate() {
        if c.trim().is_empty() {
            return Err(Error::BadHeader {
                column: i + 1,
                message: "empty column name".into(),
            });
        }
        if !seen.insert(c.as_str()) {
            return Err(Error::BadHeader {
                column: i + 1,
                message: format!("duplicate column name `{c}`"),
            });
        }
    }
    Ok(())
}

/// Reads a delimited text file with a mandatory header row.
///
/// Empty and non-numeric cells become missing. Row numbers in errors are
/// 1-based file lines, so the first data row is line 2.
pub fn load_dataset(path: impl AsRef<Path>, delimiter: u8) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, delimiter)
}

pub fn read_dataset<R: std::io::Read>(reader: R, delimiter: u8) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    validate_header(&header)?;
    let p = header.len();

    let mut values = Vec::new();
    let mut n_rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(n_rows + 2);
        if rec.len() != p {
            return Err(Error::RaggedRow {
                row: line,
                expected: p,
                found: rec.len(),
            });
        }
        values.extend(rec.iter().map(parse_cell));
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyDataset("no data rows after the header".into()));
    }
    Ok(Dataset {
        columns: header,
        n_rows,
        values,
    })
}

fn parse_cell(s: &str) -> f64 {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => v,
        _ => f64::NAN,
    }
}

/// Case counts from listwise screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScreenSummary {
    pub received: usize,
    pub excluded: usize,
    pub valid: usize,
}

/// Listwise deletion: keeps exactly the rows with no missing cell, in order.
pub fn screen_cases(d: &Dataset) -> Result<(Dataset, ScreenSummary)> {
    let p = d.n_columns();
    let mut values = Vec::with_capacity(d.values.len());
    let mut kept = 0;
    for r in 0..d.n_rows {
        let row = d.row(r);
        if row.iter().all(|v| !v.is_nan()) {
            values.extend_from_slice(row);
            kept += 1;
        }
    }
    let summary = ScreenSummary {
        received: d.n_rows,
        excluded: d.n_rows - kept,
        valid: kept,
    };
    if kept == 0 {
        return Err(Error::EmptyDataset(format!(
            "all {} cases have at least one missing cell",
            d.n_rows
        )));
    }
    debug_assert_eq!(values.len(), kept * p);
    Ok((
        Dataset {
            columns: d.columns.clone(),
            n_rows: kept,
            values,
        },
        summary,
    ))
}

/// Column-wise z-scores (sample sd) with the moments needed to undo them.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    columns: Vec<String>,
    values: DMatrix<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl StandardizedDataset {
    /// Standardizes the columns of an already complete matrix.
    pub fn from_matrix(columns: Vec<String>, mut values: DMatrix<f64>) -> Result<Self> {
        validate_header(&columns)?;
        if columns.len() != values.ncols() {
            return Err(Error::InvalidParameter(format!(
                "{} column names for {} columns",
                columns.len(),
                values.ncols()
            )));
        }
        if values.nrows() < 2 {
            return Err(Error::EmptyDataset("standardization needs at least 2 cases".into()));
        }
        let mut means = Vec::with_capacity(columns.len());
        let mut sds = Vec::with_capacity(columns.len());
        for (j, mut col) in values.column_iter_mut().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "column `{}` has missing cells; screen the data first",
                    columns[j]
                )));
            }
            let (m, sd) = stats::standardize_in_place(col.as_mut_slice())
                .ok_or_else(|| Error::ZeroVariance(columns[j].clone()))?;
            means.push(m);
            sds.push(sd);
        }
        Ok(Self {
            columns,
            values,
            means,
            sds,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_cases(&self) -> usize {
        self.values.nrows()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        // nalgebra stores column-major, so each column is contiguous
        let n = self.values.nrows();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    /// Undoes the standardization.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut raw = self.values.clone();
        for (j, mut col) in raw.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.sds[j] + self.means[j];
            }
        }
        raw
    }

    /// Case resample by row index, re-standardized.
    pub fn resample(&self, rows: &[usize]) -> Result<Self> {
        let p = self.values.ncols();
        let m = DMatrix::from_fn(rows.len(), p, |i, j| self.values[(rows[i], j)]);
        Self::from_matrix(self.columns.clone(), m)
    }
}

pub fn standardize(d: &Dataset) -> Result<StandardizedDataset> {
    let m = DMatrix::from_fn(d.n_rows, d.n_columns(), |i, j| d.values[i * d.n_columns() + j]);
    StandardizedDataset::from_matrix(d.columns.clone(), m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_simple_csv() {
        let d = read_dataset("a,b\n1,2\n3,4\n5,6\n".as_bytes(), b',').unwrap();
        assert_eq!(d.n_cases(), 3);
        assert_eq!(d.n_columns(), 2);
        assert_eq!(d.get(2, 1), Some(6.0));
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = read_dataset("a,b\n1,\n3,4\n".as_bytes(), b',').unwrap();
        assert!(d.is_missing(0, 1));
        assert!(!d.is_missing(1, 1));
        assert_eq!(d.missing_count(), 1);
    }

    #[test]
    fn non_numeric_cell_is_missing() {
        let d = read_dataset("a;b\n1;x\n3;4\n".as_bytes(), b';').unwrap();
        assert!(d.is_missing(0, 1));
    }

    #[test]
    fn ragged_row_names_line() {
        let err = read_dataset("a,b\n1,2\n1,2,3\n".as_bytes(), b',').unwrap_err();
        match err {
            Error::RaggedRow { row, expected, found } => {
                assert_eq!((row, expected, found), (3, 2, 3));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = read_dataset("a,a\n1,2\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::BadHeader { column: 2, .. }));
    }

    #[test]
    fn header_only_is_empty() {
        let err = read_dataset("a,b\n".as_bytes(), b',').unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_dataset("/nonexistent/x.csv", b',').unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn screening_counts_and_order() {
        let nan = f64::NAN;
        let d = Dataset::from_rows(
            names(&["a", "b"]),
            vec![vec![1., 2.], vec![nan, 1.], vec![3., 4.], vec![5., nan], vec![7., 8.]],
        )
        .unwrap();
        let (s, sum) = screen_cases(&d).unwrap();
        assert_eq!(sum, ScreenSummary { received: 5, excluded: 2, valid: 3 });
        assert_eq!(s.column(0), vec![1., 3., 7.]);
    }

    #[test]
    fn screening_complete_data_is_identity() {
        let d = Dataset::from_rows(names(&["a"]), vec![vec![1.], vec![2.]]).unwrap();
        let (s, sum) = screen_cases(&d).unwrap();
        assert_eq!(s, d);
        assert_eq!(sum.excluded, 0);
    }

    #[test]
    fn screening_everything_is_an_error() {
        let rows = (0..5).map(|i| vec![i as f64, f64::NAN]).collect();
        let d = Dataset::from_rows(names(&["a", "b"]), rows).unwrap();
        assert!(matches!(screen_cases(&d), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn screening_mirrors_listwise_exclusion_counts() {
        // 706 questionnaires received, 91 incomplete
        let rows = (0..706)
            .map(|i| vec![i as f64, if i % 7 == 3 && i < 91 * 7 { f64::NAN } else { 1.0 }])
            .collect();
        let d = Dataset::from_rows(names(&["a", "b"]), rows).unwrap();
        let (_, sum) = screen_cases(&d).unwrap();
        assert_eq!(sum, ScreenSummary { received: 706, excluded: 91, valid: 615 });
    }

    #[test]
    fn standardize_hand_example() {
        let d = Dataset::from_rows(names(&["a"]), vec![vec![1.], vec![2.], vec![3.]]).unwrap();
        let s = standardize(&d).unwrap();
        assert_eq!(s.column(0), &[-1.0, 0.0, 1.0]);
        assert_eq!(s.sds(), &[1.0]);
        assert_eq!(s.means(), &[2.0]);
    }

    #[test]
    fn constant_column_names_itself() {
        let d = Dataset::from_rows(names(&["x", "k"]), vec![vec![1., 4.], vec![2., 4.], vec![3., 4.]])
            .unwrap();
        match standardize(&d).unwrap_err() {
            Error::ZeroVariance(c) => assert_eq!(c, "k"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn reconstruct_round_trips() {
        let d = Dataset::from_rows(
            names(&["a", "b"]),
            vec![vec![1., 10.], vec![4., 20.], vec![2., 15.], vec![5., 11.]],
        )
        .unwrap();
        let s = standardize(&d).unwrap();
        let raw = s.reconstruct();
        for i in 0..4 {
            for j in 0..2 {
                assert!((raw[(i, j)] - d.get(i, j).unwrap()).abs() < 1e-12);
            }
        }
    }
}
