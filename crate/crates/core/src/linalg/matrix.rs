use std::fmt;
use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use crate::error::{input, Error, Result};

/// Row-major dense matrix of `f64`.
///
/// Every constructor that accepts caller data rejects NaN and infinities.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return input(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return input(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. All rows must share a length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return input(format!("row {i} has {} entries, expected {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Stacks column vectors side by side.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Plain `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return input(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        Ok(self.matmul_unchecked(rhs))
    }

    pub(crate) fn matmul_unchecked(&self, rhs: &Self) -> Self {
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Self::from_vec_unchecked(m, n, out)
    }

    /// `selfᵀ * rhs` without materialising the transpose.
    pub(crate) fn tr_matmul(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.rows, rhs.rows);
        let (k, m, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        for p in 0..k {
            let a_row = self.row(p);
            let b_row = rhs.row(p);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self::from_vec_unchecked(m, n, out)
    }

    /// `self * rhsᵀ`.
    pub(crate) fn matmul_tr(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.cols, rhs.cols);
        Self::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return input(format!(
                "vector of length {} does not fit {}x{}",
                x.len(),
                self.rows,
                self.cols
            ));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    /// Entry-wise product.
    pub fn hadamard(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a * b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return input(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖self − selfᵀ‖_max ≤ tol` for square matrices.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (i + 1..self.cols).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    /// Writes the text form: a `rows cols` header then one line per row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.rows, self.cols).unwrap();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|&v| format_f64(v)).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    /// Parses the text form written by [`DenseMatrix::to_text`].
    ///
    /// Trailing lines after the last matrix row are left unread; use
    /// [`parse_matrix_prefix`] to get at them.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let m = parse_matrix_lines(&mut lines)?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Format("trailing content after matrix".into()));
        }
        Ok(m)
    }
}

/// Parses a matrix from the front of `text`, returning it with the
/// remaining unparsed lines.
pub fn parse_matrix_prefix(text: &str) -> Result<(DenseMatrix, Vec<&str>)> {
    let mut lines = text.lines();
    let m = parse_matrix_lines(&mut lines)?;
    Ok((m, lines.collect()))
}

fn parse_matrix_lines<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<DenseMatrix> {
    let mut content = lines.filter(|l| !l.trim().is_empty());
    let header = content
        .next()
        .ok_or_else(|| Error::Format("missing `rows cols` header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Format(format!(
            "header {header:?} must be `rows cols`"
        )));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = content
            .next()
            .ok_or_else(|| Error::Format(format!("expected {rows} rows, found {i}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_f64(tok)?);
        }
        if data.len() - before != cols {
            return Err(Error::Format(format!(
                "row {i} has {} values, expected {cols}",
                data.len() - before
            )));
        }
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| Error::Format(e.to_string()))
}

pub(crate) fn parse_f64(tok: &str) -> Result<f64> {
    let v = f64::from_str(tok).map_err(|e| Error::Format(format!("bad number {tok:?}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("non-finite number {tok:?}")));
    }
    Ok(v)
}

/// Shortest decimal that parses back to the same `f64` (at most 17
/// significant digits).
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        if self.rows > 12 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_finite() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_variants_agree() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.as_slice(), &[7.0, -1.0, 16.0, -1.0]);
        assert_eq!(a.transpose().tr_matmul(&b), ab);
        assert_eq!(a.matmul_tr(&b.transpose()), ab);
        assert!(b.matmul(&b).is_err());
    }

    #[test]
    fn text_format_parses_header_and_rows() {
        let m = DenseMatrix::from_text("2 3\n1 2 3\n-4.5 0 1e-3\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 0)], -4.5);
        assert_eq!(m[(1, 2)], 1e-3);
        assert!(DenseMatrix::from_text("2 2\n1 2\n3\n").is_err());
        assert!(DenseMatrix::from_text("2 2\n1 2\n").is_err());
        assert!(DenseMatrix::from_text("1 1\nnan\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(
            vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 6)
        ) {
            let m = DenseMatrix::new(2, 3, vals).unwrap();
            let back = DenseMatrix::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(m.as_slice(), back.as_slice());
        }
    }
}
