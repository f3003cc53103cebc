//! Observation matrices: rows are time points, columns are coordinates.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An `n x p` matrix of finite observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!("data matrix must be non-empty, got {n}x{p}")));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {n}x{p} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                i / p + 1,
                i % p + 1
            )));
        }
        Ok(Self { values, n, p })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} columns, expected {p}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(n, p, values)
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            values: vec![0.0; n * p],
            n,
            p,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.values[t * self.p + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    /// Elementwise `a * x + c`.
    pub fn affine(&self, a: f64, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v + c).collect(),
            n: self.n,
            p: self.p,
        }
    }

    /// Copy with columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.p)?;
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            values.extend(perm.iter().map(|&j| row[j]));
        }
        Ok(Self {
            values,
            n: self.n,
            p: self.p,
        })
    }

    /// Parses a numeric CSV. With `has_header` the first record is skipped.
    pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut values = Vec::new();
        let mut p = None;
        let mut n = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1 + usize::from(has_header);
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            match p {
                None => p = Some(rec.len()),
                Some(p) if p != rec.len() => {
                    return Err(Error::Format(format!(
                        "ragged input: row {row} has {} columns, expected {p}",
                        rec.len()
                    )))
                }
                _ => {}
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("not a number: {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("non-finite value: {cell:?}"),
                    });
                }
                values.push(v);
            }
            n += 1;
        }
        let Some(p) = p else {
            return Err(Error::Format("no rows in input".into()));
        };
        Self::new(n, p, values)
    }

    pub fn read_csv_path(path: &Path, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), has_header)
    }

    /// Writes the matrix as headerless CSV using round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.rows() {
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
}

pub(crate) fn check_permutation(perm: &[usize], len: usize) -> Result<()> {
    if perm.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for dimension {len}",
            perm.len()
        )));
    }
    let mut seen = vec![false; len];
    for &j in perm {
        if j >= len || std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid("not a permutation"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_headerless_parse_identically() {
        let plain = "1,2,3\n4,5,6\n";
        let with_header = "a,b,c\n1,2,3\n4,5,6\n";
        let a = DataMatrix::read_csv(plain.as_bytes(), false).unwrap();
        let b = DataMatrix::read_csv(with_header.as_bytes(), true).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.p()), (2, 3));
        assert_eq!(a.get(1, 2), 6.0);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let err = DataMatrix::read_csv("1,2\n3,x\n".as_bytes(), false).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_empty_inputs_fail() {
        assert!(matches!(
            DataMatrix::read_csv("1,2\n3\n".as_bytes(), false),
            Err(Error::Format(_))
        ));
        let err = DataMatrix::read_csv("".as_bytes(), false).unwrap_err();
        assert!(err.to_string().contains("no rows"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DataMatrix::from_rows(&[[0.1, -2.5e-300], [1.0 / 3.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(DataMatrix::read_csv(buf.as_slice(), false).unwrap(), m);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }
}
