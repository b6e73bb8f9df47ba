//! Compressed sparse row matrices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed in input order,
    /// so the result is independent of anything but the triplet sequence.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let trip: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let mut m = Self::from_triplets(d.len(), d.len(), &trip);
        m.symmetric = true;
        m
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut trip = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, &trip)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_flagged_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Column/value pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                trip.push((j, i, v));
            }
        }
        let mut t = Self::from_triplets(self.n_cols, self.n_rows, &trip);
        t.symmetric = self.symmetric;
        t
    }

    /// Largest `|A_ij - A_ji|` relative to the largest `|A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Mark as symmetric after validating `|A - A^T|_max <= 1e-12` relative.
    pub fn flag_symmetric(mut self) -> Result<Self> {
        let asym = self.asymmetry();
        if asym > 1e-12 {
            return Err(Error::Domain(format!(
                "matrix flagged symmetric has relative asymmetry {asym:.3e}"
            )));
        }
        self.symmetric = true;
        Ok(self)
    }

    /// `sum_k c_k A_k` over the union of the sparsity patterns.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Domain("empty linear combination".into()))?
            .1;
        let (n_rows, n_cols) = (first.n_rows, first.n_cols);
        for (_, m) in terms {
            if m.n_rows != n_rows || m.n_cols != n_cols {
                return Err(Error::Dimension {
                    expected: n_rows,
                    found: m.n_rows,
                });
            }
        }
        if terms
            .iter()
            .all(|(_, m)| m.row_ptr == first.row_ptr && m.col_idx == first.col_idx)
        {
            let mut values = vec![0.0; first.nnz()];
            for (c, m) in terms {
                for (o, v) in values.iter_mut().zip(&m.values) {
                    *o += c * v;
                }
            }
            return Ok(Self {
                n_rows,
                n_cols,
                row_ptr: first.row_ptr.clone(),
                col_idx: first.col_idx.clone(),
                values,
                symmetric: terms.iter().all(|(_, m)| m.symmetric),
            });
        }
        let mut trip = Vec::with_capacity(terms.iter().map(|(_, m)| m.nnz()).sum());
        for (c, m) in terms {
            for i in 0..n_rows {
                for (j, v) in m.row(i) {
                    trip.push((i, j, c * v));
                }
            }
        }
        let mut out = Self::from_triplets(n_rows, n_cols, &trip);
        out.symmetric = terms.iter().all(|(_, m)| m.symmetric);
        Ok(out)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Sum of all stored entries.
    pub fn entry_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Keep rows/columns that map to `Some(new_index)`.
    pub fn restrict(&self, map: impl Fn(usize) -> Option<usize>, n_new: usize) -> Self {
        let mut trip = Vec::new();
        for i in 0..self.n_rows {
            if let Some(ri) = map(i) {
                for (j, v) in self.row(i) {
                    if let Some(cj) = map(j) {
                        trip.push((ri, cj, v));
                    }
                }
            }
        }
        let mut out = Self::from_triplets(n_new, n_new, &trip);
        out.symmetric = self.symmetric;
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
