//! Sparse random directions and the projection of a data matrix onto them.
//!
//! Entries take the values `+sqrt(3)`, `0` and `-sqrt(3)` with probabilities
//! 1/6, 2/3 and 1/6. Only the signs of nonzero entries are stored, column by
//! column, so a projection touches roughly a third of the data.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::data::{check_permutation, DataMatrix};
use crate::error::{Error, Result};
use crate::rng;

pub const ENTRY_MAGNITUDE: f64 = 1.732_050_807_568_877_2;

/// A `p x k` sparse direction matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionMatrix {
    p: usize,
    k: usize,
    seed: u64,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    signs: Vec<i8>,
}

/// `k` projected univariate series of length `n`, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSeries {
    n: usize,
    k: usize,
    values: Vec<f64>,
    source_seed: u64,
}

impl ProjectedSeries {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn source_seed(&self) -> u64 {
        self.source_seed
    }

    pub fn series(&self, r: usize) -> &[f64] {
        &self.values[r * self.n..(r + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn get(&self, t: usize, r: usize) -> f64 {
        self.values[r * self.n + t]
    }
}

/// Draws a `p x k` direction matrix. Column `r` comes from its own stream,
/// so the first `k'` columns for `k' < k` agree with a `k'`-column draw.
pub fn generate_directions(p: usize, k: usize, seed: u64) -> Result<ProjectionMatrix> {
    if p == 0 || k == 0 {
        return Err(Error::invalid(format!("directions need p >= 1 and k >= 1, got p={p}, k={k}")));
    }
    let mut col_ptr = Vec::with_capacity(k + 1);
    let mut row_idx = Vec::with_capacity(p * k / 3 + 1);
    let mut signs = Vec::with_capacity(p * k / 3 + 1);
    col_ptr.push(0);
    for r in 0..k {
        let mut rng = rng::stream(seed, r as u64);
        for j in 0..p {
            match rng.random_range(0u8..6) {
                0 => {
                    row_idx.push(j);
                    signs.push(1);
                }
                1 => {
                    row_idx.push(j);
                    signs.push(-1);
                }
                _ => {}
            }
        }
        col_ptr.push(row_idx.len());
    }
    Ok(ProjectionMatrix {
        p,
        k,
        seed,
        col_ptr,
        row_idx,
        signs,
    })
}

impl ProjectionMatrix {
    /// Builds a matrix from `(row, col, sign)` triplets with `sign` in {-1, +1}.
    pub fn from_triplets(p: usize, k: usize, seed: u64, triplets: &[(usize, usize, i8)]) -> Result<Self> {
        if p == 0 || k == 0 {
            return Err(Error::invalid("directions need p >= 1 and k >= 1"));
        }
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(j, r, _)| (r, j));
        let mut col_ptr = vec![0; k + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut signs = Vec::with_capacity(sorted.len());
        for (i, &(j, r, s)) in sorted.iter().enumerate() {
            if j >= p || r >= k {
                return Err(Error::invalid(format!("triplet ({j}, {r}) outside {p}x{k}")));
            }
            if s != 1 && s != -1 {
                return Err(Error::invalid(format!("sign must be +1 or -1, got {s}")));
            }
            if i > 0 && sorted[i - 1].0 == j && sorted[i - 1].1 == r {
                return Err(Error::invalid(format!("duplicate entry ({j}, {r})")));
            }
            col_ptr[r + 1] += 1;
            row_idx.push(j);
            signs.push(s);
        }
        for r in 0..k {
            col_ptr[r + 1] += col_ptr[r];
        }
        Ok(Self {
            p,
            k,
            seed,
            col_ptr,
            row_idx,
            signs,
        })
    }

    /// Builds a matrix from dense column-major entries, each of which must be
    /// `0` or `+-sqrt(3)` (within 1e-12).
    pub fn from_dense(p: usize, k: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * k {
            return Err(Error::DimensionMismatch(format!("{} entries for {p}x{k}", entries.len())));
        }
        let mut triplets = Vec::new();
        for r in 0..k {
            for j in 0..p {
                let v = entries[r * p + j];
                if v.abs() < 1e-12 {
                    continue;
                }
                if (v.abs() - ENTRY_MAGNITUDE).abs() > 1e-12 {
                    return Err(Error::invalid(format!("entry {v} is not 0 or +-sqrt(3)")));
                }
                triplets.push((j, r, if v > 0.0 { 1 } else { -1 }));
            }
        }
        Self::from_triplets(p, k, 0, &triplets)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn entry(&self, j: usize, r: usize) -> f64 {
        let (rows, signs) = self.column(r);
        match rows.binary_search(&j) {
            Ok(i) => f64::from(signs[i]) * ENTRY_MAGNITUDE,
            Err(_) => 0.0,
        }
    }

    /// Row indices and signs of the nonzeros in column `r`.
    pub fn column(&self, r: usize) -> (&[usize], &[i8]) {
        let span = self.col_ptr[r]..self.col_ptr[r + 1];
        (&self.row_idx[span.clone()], &self.signs[span])
    }

    /// `(row, col, sign)` triplets in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        (0..self.k).flat_map(move |r| {
            let (rows, signs) = self.column(r);
            rows.iter().zip(signs).map(move |(&j, &s)| (j, r, s))
        })
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p * self.k];
        for (j, r, s) in self.triplets() {
            out[r * self.p + j] = f64::from(s) * ENTRY_MAGNITUDE;
        }
        out
    }

    /// Copy with rows reordered so that new row `j` is old row `perm[j]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.p)?;
        let mut inverse = vec![0; self.p];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let triplets: Vec<_> = self.triplets().map(|(j, r, s)| (inverse[j], r, s)).collect();
        Self::from_triplets(self.p, self.k, self.seed, &triplets)
    }

    /// Writes the header `p,k,seed` followed by one `row,col,sign` line per nonzero.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "p,k,seed")?;
        writeln!(w, "{},{},{}", self.p, self.k, self.seed)?;
        writeln!(w, "row,col,sign")?;
        for (j, r, s) in self.triplets() {
            writeln!(w, "{j},{r},{s}")?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i + 1, l)),
                Some((i, Err(e))) => Err(Error::Format(format!("line {}: {e}", i + 1))),
                None => Err(Error::Format(format!("missing {what}"))),
            }
        };
        let (_, h) = next("header")?;
        if h.trim() != "p,k,seed" {
            return Err(Error::Format(format!("bad triplet header {h:?}")));
        }
        let (line, dims) = next("dimensions")?;
        let parts: Vec<&str> = dims.trim().split(',').collect();
        let parse_u64 = |s: &str, column: usize| -> Result<u64> {
            s.trim().parse().map_err(|_| Error::Parse {
                row: line,
                column,
                message: format!("not an integer: {s:?}"),
            })
        };
        if parts.len() != 3 {
            return Err(Error::Format(format!("line {line}: expected p,k,seed")));
        }
        let p = parse_u64(parts[0], 1)? as usize;
        let k = parse_u64(parts[1], 2)? as usize;
        let seed = parse_u64(parts[2], 3)?;
        let (_, h2) = next("triplet header")?;
        if h2.trim() != "row,col,sign" {
            return Err(Error::Format(format!("bad triplet header {h2:?}")));
        }
        let mut triplets = Vec::new();
        for (i, l) in lines {
            let l = l.map_err(|e| Error::Format(e.to_string()))?;
            if l.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = l.trim().split(',').collect();
            let row = i + 1;
            if f.len() != 3 {
                return Err(Error::Format(format!("line {row}: expected row,col,sign")));
            }
            let cell = |c: usize| -> Result<i64> {
                f[c].trim().parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("not an integer: {:?}", f[c]),
                })
            };
            let (j, r, s) = (cell(0)?, cell(1)?, cell(2)?);
            if j < 0 || r < 0 {
                return Err(Error::Format(format!("line {row}: negative index")));
            }
            triplets.push((j as usize, r as usize, s as i8));
        }
        Self::from_triplets(p, k, seed, &triplets)
    }
}

/// Projects `x` onto the directions: `Y = X D / sqrt(k)`.
pub fn project(x: &DataMatrix, d: &ProjectionMatrix) -> Result<ProjectedSeries> {
    if x.p() != d.p() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns but directions have {} rows",
            x.p(),
            d.p()
        )));
    }
    let n = x.n();
    let scale = ENTRY_MAGNITUDE / (d.k() as f64).sqrt();
    let mut values = vec![0.0; n * d.k()];
    for r in 0..d.k() {
        let (rows, signs) = d.column(r);
        let out = &mut values[r * n..(r + 1) * n];
        for (t, y) in out.iter_mut().enumerate() {
            let row = x.row(t);
            let acc: f64 = rows
                .iter()
                .zip(signs)
                .map(|(&j, &s)| if s > 0 { row[j] } else { -row[j] })
                .sum();
            *y = scale * acc;
        }
    }
    Ok(ProjectedSeries {
        n,
        k: d.k(),
        values,
        source_seed: d.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_project(x: &DataMatrix, d: &ProjectionMatrix) -> Vec<Vec<f64>> {
        let dense = d.to_dense();
        (0..x.n())
            .map(|t| {
                (0..d.k())
                    .map(|r| (0..x.p()).map(|j| x.get(t, j) * dense[r * d.p() + j]).sum::<f64>() / (d.k() as f64).sqrt())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn same_seed_gives_identical_matrix() {
        let a = generate_directions(3, 2, 99).unwrap();
        let b = generate_directions(3, 2, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_dense(), b.to_dense());
        assert_ne!(generate_directions(50, 20, 1).unwrap(), generate_directions(50, 20, 2).unwrap());
    }

    #[test]
    fn zero_dimensions_rejected() {
        assert!(matches!(generate_directions(0, 3, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_directions(3, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn entry_frequencies_match_distribution() {
        let d = generate_directions(10_000, 1, 2024).unwrap();
        let dense = d.to_dense();
        let count = |v: f64| dense.iter().filter(|&&e| (e - v).abs() < 1e-12).count() as f64 / 10_000.0;
        assert!((count(ENTRY_MAGNITUDE) - 1.0 / 6.0).abs() < 0.02);
        assert!((count(0.0) - 2.0 / 3.0).abs() < 0.02);
        assert!((count(-ENTRY_MAGNITUDE) - 1.0 / 6.0).abs() < 0.02);
    }

    #[test]
    fn entry_moments() {
        for seed in 0..5 {
            let d = generate_directions(200, 60, seed).unwrap();
            let dense = d.to_dense();
            let m = dense.len() as f64;
            let mean = dense.iter().sum::<f64>() / m;
            let second = dense.iter().map(|v| v * v).sum::<f64>() / m;
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((second - 1.0).abs() < 0.05, "second moment {second}");
            assert!((1.0 - d.nnz() as f64 / m - 2.0 / 3.0).abs() < 0.02);
            assert!(dense.iter().all(|&v| v == 0.0 || v == ENTRY_MAGNITUDE || v == -ENTRY_MAGNITUDE));
        }
    }

    #[test]
    fn prefix_columns_are_shared_across_k() {
        let small = generate_directions(40, 10, 5).unwrap();
        let big = generate_directions(40, 30, 5).unwrap();
        for r in 0..10 {
            assert_eq!(small.column(r), big.column(r));
        }
    }

    #[test]
    fn hand_evaluated_projection() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let d = ProjectionMatrix::from_dense(3, 1, &[ENTRY_MAGNITUDE, 0.0, -ENTRY_MAGNITUDE]).unwrap();
        let y = project(&x, &d).unwrap();
        assert!((y.get(0, 0) + 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((y.get(0, 0) - -3.46410).abs() < 1e-5);
    }

    #[test]
    fn zero_data_projects_to_zero() {
        let x = DataMatrix::zeros(7, 11);
        let d = generate_directions(11, 5, 3).unwrap();
        let y = project(&x, &d).unwrap();
        assert!(y.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let x = DataMatrix::zeros(4, 3);
        let d = generate_directions(4, 2, 0).unwrap();
        assert!(matches!(project(&x, &d), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sparse_product_matches_dense_product() {
        let d = generate_directions(17, 9, 8).unwrap();
        let vals: Vec<f64> = (0..5 * 17).map(|i| ((i * 37 % 23) as f64 - 11.0) / 3.0).collect();
        let x = DataMatrix::new(5, 17, vals).unwrap();
        let y = project(&x, &d).unwrap();
        let reference = naive_project(&x, &d);
        for t in 0..5 {
            for r in 0..9 {
                assert!((y.get(t, r) - reference[t][r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_shift_is_carried_through() {
        // rows before the break are mu, after are mu + delta
        let p = 30;
        let mu: Vec<f64> = (0..p).map(|j| j as f64 * 0.1).collect();
        let delta: Vec<f64> = (0..p).map(|j| ((j % 7) as f64 - 3.0) * 0.5).collect();
        let after: Vec<f64> = mu.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let x = DataMatrix::from_rows(&[mu.clone(), mu.clone(), after.clone(), after]).unwrap();
        let d = generate_directions(p, 12, 77).unwrap();
        let y = project(&x, &d).unwrap();
        let dense = d.to_dense();
        for r in 0..12 {
            let expected: f64 = (0..p).map(|j| delta[j] * dense[r * p + j]).sum::<f64>() / 12f64.sqrt();
            assert!((y.get(2, r) - y.get(1, r) - expected).abs() < 1e-10);
            assert!((y.get(0, r) - y.get(1, r)).abs() < 1e-15);
        }
    }

    #[test]
    fn triplet_file_round_trip() {
        let d = generate_directions(23, 7, 123).unwrap();
        let mut buf = Vec::new();
        d.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p,k,seed\n23,7,123\nrow,col,sign\n"));
        let back = ProjectionMatrix::read_triplets(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn permuting_rows_matches_dense_permutation() {
        let d = generate_directions(6, 3, 4).unwrap();
        let perm = [5, 3, 1, 0, 2, 4];
        let pd = d.permute_rows(&perm).unwrap();
        for r in 0..3 {
            for (new, &old) in perm.iter().enumerate() {
                assert_eq!(pd.entry(new, r), d.entry(old, r));
            }
        }
    }
}
