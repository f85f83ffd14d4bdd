//! Observations stored as the rows of an `n x q` matrix.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: DMatrix<f64>,
    /// Center subtracted from the original observations, if any.
    center: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() == 0 {
            return Err(Error::InvalidParameter("dimension q must be >= 1".into()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("observations must be finite".into()));
        }
        Ok(Dataset { rows, center: None })
    }

    pub fn empty(q: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(0, q))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if let Some(bad) = rows.iter().find(|r| r.len() != q) {
            return Err(Error::DimensionMismatch {
                expected: q,
                actual: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn q(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn center_used(&self) -> Option<&[f64]> {
        self.center.as_deref()
    }

    /// Subtracts `center` from every row and records it.
    pub fn subtract_center(&self, center: &[f64]) -> Result<Dataset> {
        if center.len() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                actual: center.len(),
            });
        }
        let mut rows = self.rows.clone();
        for mut r in rows.row_iter_mut() {
            for (v, c) in r.iter_mut().zip(center) {
                *v -= c;
            }
        }
        Ok(Dataset {
            rows,
            center: Some(center.to_vec()),
        })
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.q() != other.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                actual: other.q(),
            });
        }
        let (n1, n2, q) = (self.n(), other.n(), self.q());
        let rows = DMatrix::from_fn(n1 + n2, q, |i, j| {
            if i < n1 {
                self.rows[(i, j)]
            } else {
                other.rows[(i - n1, j)]
            }
        });
        Ok(Dataset { rows, center: None })
    }

    /// Subset of rows in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let rows = DMatrix::from_fn(idx.len(), self.q(), |i, j| self.rows[(idx[i], j)]);
        Dataset {
            rows,
            center: self.center.clone(),
        }
    }

    /// Numerical rank of the data matrix, singular values below
    /// `1e-10 * largest` count as zero.
    pub fn rank(&self) -> usize {
        if self.n() == 0 {
            return 0;
        }
        let sv = self.rows.clone().singular_values();
        let top = sv.max();
        if top <= 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > 1e-10 * top).count()
    }

    pub fn spans(&self) -> bool {
        self.rank() == self.q()
    }

    /// Parses headerless comma-separated observations, one per line.
    pub fn parse_csv(text: &str) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("csv: {e}")))?;
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse(format!("csv row {}: bad value {f:?}", line + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Headerless CSV with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in self.rows.row_iter() {
            let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse_csv(&text)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Dataset::from_rows(&[vec![0.1, -2.5e-300], vec![1.0 / 3.0, 1e300]]).unwrap();
        let back = Dataset::parse_csv(&d.to_csv()).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        assert!(Dataset::parse_csv("1,2\n3\n").is_err());
        assert!(Dataset::parse_csv("1,abc\n").is_err());
        assert!(Dataset::parse_csv("1,inf\n").is_err());
        assert!(matches!(Dataset::parse_csv(""), Err(Error::EmptyDataset)));
    }

    #[test]
    fn csv_tolerates_spaces_and_comments() {
        let d = Dataset::parse_csv("# x,y\n 1 , 2\n3,4\n").unwrap();
        assert_eq!((d.n(), d.q()), (2, 2));
    }

    #[test]
    fn rank_detects_collinear_rows() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(d.rank(), 1);
        assert!(!d.spans());
    }
}
