//! Contiguous local storage: column-major matrices and stride-1 vectors.

use crate::error::{dim_err, Result};
use crate::scalar::Scalar;

/// Column-major dense matrix with an explicit leading dimension.
///
/// Element `(i, j)` (0-based) lives at offset `i + j * lead` and `lead >= rows`
/// always holds. Rows between `rows` and `lead` inside each column are padding:
/// no kernel reads or writes them.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    lead: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            lead: rows,
            data: vec![S::ZERO; rows * cols],
        }
    }

    /// Zero matrix with padding rows between `rows` and `lead`.
    pub fn zeros_with_lead(rows: usize, cols: usize, lead: usize) -> Self {
        assert!(lead >= rows, "lead {lead} < rows {rows}");
        DenseMatrix {
            rows,
            cols,
            lead,
            data: vec![S::ZERO; lead * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from a column-major data vector with `lead == rows`.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "column-major data length {} != {rows}x{cols}",
                data.len()
            ));
        }
        Ok(DenseMatrix {
            rows,
            cols,
            lead: rows,
            data,
        })
    }

    /// Builds from rows listed top to bottom (test and I/O convenience).
    pub fn from_rows(rows: &[&[S]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn lead(&self) -> usize {
        self.lead
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i + j * self.lead]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of range");
        self.data[i + j * self.lead] = v;
    }

    /// Full backing slab, including padding rows when `lead > rows`.
    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// The `rows` live entries of column `j`.
    pub fn col(&self, j: usize) -> &[S] {
        assert!(j < self.cols);
        &self.data[j * self.lead..j * self.lead + self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [S] {
        assert!(j < self.cols);
        let off = j * self.lead;
        &mut self.data[off..off + self.rows]
    }

    /// Copies the `m x n` block with top-left corner `(i0, j0)` out into a
    /// fresh tightly-packed matrix.
    pub fn copy_block(&self, i0: usize, j0: usize, m: usize, n: usize) -> DenseMatrix<S> {
        assert!(i0 + m <= self.rows && j0 + n <= self.cols, "block out of range");
        let mut out = DenseMatrix::zeros(m, n);
        for j in 0..n {
            let src = &self.data[i0 + (j0 + j) * self.lead..];
            out.col_mut(j).copy_from_slice(&src[..m]);
        }
        out
    }

    /// Writes `block` back at top-left corner `(i0, j0)`.
    pub fn write_block(&mut self, i0: usize, j0: usize, block: &DenseMatrix<S>) {
        assert!(
            i0 + block.rows <= self.rows && j0 + block.cols <= self.cols,
            "block out of range"
        );
        for j in 0..block.cols {
            let dst = i0 + (j0 + j) * self.lead;
            self.data[dst..dst + block.rows].copy_from_slice(block.col(j));
        }
    }

    pub fn transposed(&self) -> DenseMatrix<S> {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn frob_norm(&self) -> f64 {
        let mut s = 0.0f64;
        for j in 0..self.cols {
            for &v in self.col(j) {
                let v = v.to_f64();
                s += v * v;
            }
        }
        s.sqrt()
    }

    /// Swaps rows `r1` and `r2` across all columns.
    pub fn swap_rows(&mut self, r1: usize, r2: usize) {
        assert!(r1 < self.rows && r2 < self.rows);
        if r1 == r2 {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(r1 + j * self.lead, r2 + j * self.lead);
        }
    }

    /// Reinterprets an `n x 1` matrix as a vector, dropping any padding.
    pub fn into_vector(self) -> DenseVector<S> {
        assert_eq!(self.cols, 1, "into_vector needs a single-column matrix");
        if self.lead == self.rows {
            DenseVector { data: self.data }
        } else {
            DenseVector {
                data: self.data[..self.rows].to_vec(),
            }
        }
    }
}

/// Stride-1 dense vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector<S> {
    data: Vec<S>,
}

impl<S: Scalar> DenseVector<S> {
    pub fn zeros(len: usize) -> Self {
        DenseVector {
            data: vec![S::ZERO; len],
        }
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        DenseVector { data }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> S) -> Self {
        DenseVector {
            data: (0..len).map(|i| f(i)).collect(),
        }
    }

    pub fn ones(len: usize) -> Self {
        DenseVector {
            data: vec![S::ONE; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize) -> S {
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: S) {
        self.data[i] = v;
    }

    /// Views the vector as an `n x 1` matrix (copies the data).
    pub fn to_matrix(&self) -> DenseMatrix<S> {
        DenseMatrix {
            rows: self.data.len(),
            cols: 1,
            lead: self.data.len(),
            data: self.data.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_major_layout() {
        let a = DenseMatrix::<f64>::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 0), 3.0);
    }

    #[test]
    fn block_round_trip() {
        let a = DenseMatrix::<f64>::from_fn(5, 4, |i, j| (i * 10 + j) as f64);
        let b = a.copy_block(1, 2, 3, 2);
        assert_eq!(b.get(0, 0), a.get(1, 2));
        let mut c = DenseMatrix::<f64>::zeros(5, 4);
        c.write_block(1, 2, &b);
        assert_eq!(c.get(3, 3), a.get(3, 3));
        assert_eq!(c.get(0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn indexing_round_trip(rows in 1usize..12, cols in 1usize..12, pad in 0usize..4,
                               i in 0usize..12, j in 0usize..12, v in -100.0f64..100.0) {
            let i = i % rows;
            let j = j % cols;
            let mut m = DenseMatrix::<f64>::zeros_with_lead(rows, cols, rows + pad);
            let before: Vec<f64> = m.data().to_vec();
            m.set(i, j, v);
            prop_assert_eq!(m.get(i, j), v);
            // every other element (and all padding) is undisturbed
            for jj in 0..cols {
                for ii in 0..rows {
                    if (ii, jj) != (i, j) {
                        prop_assert_eq!(m.get(ii, jj), 0.0);
                    }
                }
            }
            let mut diffs = 0;
            for (a, b) in m.data().iter().zip(before.iter()) {
                if a != b { diffs += 1; }
            }
            prop_assert!(diffs <= 1);
        }
    }
}
