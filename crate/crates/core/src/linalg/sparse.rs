use crate::linalg::DenseMatrix;

/// Compressed sparse row matrix, used for graph propagation operators.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            assert!(i < rows && j < cols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), &t)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Non-zeros of row `i` as `(col, value)`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `self * rhs`.
    pub fn mul_dense(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, rhs.rows(), "sparse-dense shape mismatch");
        let n = rhs.cols();
        let mut out = DenseMatrix::zeros(self.rows, n);
        for i in 0..self.rows {
            let span = self.indptr[i]..self.indptr[i + 1];
            let out_row = out.row_mut(i);
            for (&j, &a) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (o, &b) in out_row.iter_mut().zip(rhs.row(j)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * rhs`.
    pub fn tr_mul_dense(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, rhs.rows(), "sparse-dense shape mismatch");
        let n = rhs.cols();
        let mut out = DenseMatrix::zeros(self.cols, n);
        for i in 0..self.rows {
            let span = self.indptr[i]..self.indptr[i + 1];
            let src = rhs.row(i);
            for (&j, &a) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (o, &b) in out.row_mut(j).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_products_match_dense() {
        let s =
            CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5), (1, 0, -1.0)]);
        assert_eq!(s.nnz(), 3);
        let d = s.to_dense();
        assert_eq!(d[(0, 1)], 1.5);
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(s.mul_dense(&x), d.matmul(&x).unwrap());
        let y = DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert_eq!(s.tr_mul_dense(&y), d.transpose().matmul(&y).unwrap());
    }
}
