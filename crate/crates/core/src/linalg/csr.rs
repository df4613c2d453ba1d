use rayon::prelude::*;

use crate::scalar::Real;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// in the order given.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *vals.last_mut().expect("non-empty") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match r.binary_search(&j) {
            Ok(p) => self.vals[self.row_ptr[i] + p],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        let mut s = T::zero();
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.vals[p] * x[self.cols[p]];
        }
        s
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        y.par_chunks_mut(1024).enumerate().for_each(|(c, out)| {
            for (r, v) in out.iter_mut().enumerate() {
                *v = self.row_dot(c * 1024 + r, x);
            }
        });
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                trip.push((self.cols[p], i, self.vals[p]));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, trip)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        let rows: Vec<Vec<(usize, T)>> = (0..self.n_rows)
            .into_par_iter()
            .map(|i| {
                let mut acc: Vec<(usize, T)> = Vec::new();
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let a = self.vals[p];
                    let k = self.cols[p];
                    for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                        acc.push((other.cols[q], a * other.vals[q]));
                    }
                }
                acc.sort_by_key(|e| e.0);
                let mut out: Vec<(usize, T)> = Vec::with_capacity(acc.len());
                for (j, v) in acc {
                    match out.last_mut() {
                        Some(last) if last.0 == j => last.1 += v,
                        _ => out.push((j, v)),
                    }
                }
                out
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for (j, v) in r {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Replaces the rows and columns of `constrained` indices by identity.
    pub fn eliminate(&mut self, constrained: &[bool]) {
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                if constrained[i] || constrained[j] {
                    self.vals[p] = if i == j { T::one() } else { T::zero() };
                }
            }
        }
    }
}
