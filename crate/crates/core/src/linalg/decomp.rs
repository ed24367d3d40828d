//! Symmetric eigendecomposition, singular value decomposition and the
//! spectral operators built on them (rank truncation, singular value
//! thresholding).
//!
//! The eigensolver is Householder tridiagonalisation followed by implicit
//! QL with Wilkinson-style shifts. The SVD is one-sided (Hestenes) Jacobi,
//! which is slower than Golub-Kahan but gives singular values with high
//! relative accuracy and needs no bidiagonal bookkeeping. Both are
//! sequential and bitwise deterministic.
//!
//! Sign convention: every returned singular or eigen vector has its
//! largest-magnitude entry positive (for SVD pairs the `u` column decides
//! and `v` follows).

use crate::error::{input, Error, Result};
use crate::linalg::matrix::{dot, norm2};
use crate::linalg::DenseMatrix;

/// Symmetry tolerance used by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 80;
const MAX_QL_ITERS: usize = 64;

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// m×r, orthonormal columns.
    pub u: DenseMatrix,
    /// Length r = min(m, n), non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// n×r, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank_capacity(&self) -> usize {
        self.sigma.len()
    }

    /// `U·diag(σ)·Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        reassemble(&self.u, &self.sigma, &self.v, self.sigma.len())
    }
}

#[derive(Clone, Debug)]
pub struct EigResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: DenseMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Zero every singular value below the threshold, keep the rest.
    Hard,
    /// Shrink every singular value by the threshold, clamping at zero.
    Soft,
}

fn check_finite(m: &DenseMatrix) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return input(format!("empty {}x{} matrix", m.rows(), m.cols()));
    }
    if !m.is_finite() {
        return input("matrix has non-finite entries");
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix, values ascending.
pub fn sym_eig(m: &DenseMatrix) -> Result<EigResult> {
    check_finite(m)?;
    if !m.is_square() {
        return Err(Error::Precondition(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::Precondition(
            "matrix is not symmetric within 1e-10".into(),
        ));
    }
    let n = m.rows();
    // Work on the exactly symmetrised copy so round-off asymmetry below the
    // tolerance cannot leak into the reduction.
    let mut v = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = v.select_columns(&order);
    for j in 0..n {
        let mut col = vectors.column(j);
        fix_sign(&mut col);
        vectors.set_column(j, &col);
    }
    Ok(EigResult { values, vectors })
}

/// Householder reduction to tridiagonal form. On exit `v` holds the
/// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
/// sub-diagonal.
fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal form, accumulating rotations into `v`.
fn tridiagonal_ql(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(Error::Diverged("tridiagonal QL did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v[(k, i + 1)];
                        let vk = v[(k, i)];
                        v[(k, i + 1)] = s * vk + c * vk1;
                        v[(k, i)] = c * vk - s * vk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Flips `x` so that its largest-magnitude entry is positive. Returns
/// whether a flip happened.
pub(crate) fn fix_sign(x: &mut [f64]) -> bool {
    let mut best = 0.0;
    let mut sign = 1.0;
    for &v in x.iter() {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
        true
    } else {
        false
    }
}

/// Thin SVD, `r = min(m, n)`.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    check_finite(m)?;
    if m.rows() >= m.cols() {
        let (u, sigma, v) = jacobi_svd(m, true);
        Ok(SvdResult {
            u,
            sigma,
            v: v.expect("vectors requested"),
        })
    } else {
        let (v, sigma, u) = jacobi_svd(&m.transpose(), true);
        let mut res = SvdResult {
            u: u.expect("vectors requested"),
            sigma,
            v,
        };
        // The transpose ran the sign rule on v; re-apply it on u.
        for j in 0..res.sigma.len() {
            let mut uc = res.u.column(j);
            if fix_sign(&mut uc) {
                res.u.set_column(j, &uc);
                let vc: Vec<f64> = res.v.column(j).iter().map(|x| -x).collect();
                res.v.set_column(j, &vc);
            }
        }
        Ok(res)
    }
}

/// Singular values only, descending.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    let sigma = if m.rows() >= m.cols() {
        jacobi_svd(m, false).1
    } else {
        jacobi_svd(&m.transpose(), false).1
    };
    Ok(sigma)
}

/// One-sided Jacobi on a tall (or square) matrix. Returns `(U, σ, V)` with
/// `V` only when requested.
fn jacobi_svd(a: &DenseMatrix, want_v: bool) -> (DenseMatrix, Vec<f64>, Option<DenseMatrix>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = if want_v {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    } else {
        Vec::new()
    };

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                if want_v {
                    rotate_pair(&mut vcols, p, q, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let negligible = smax * (m.max(n) as f64) * f64::EPSILON;

    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut vsorted: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[slot] > negligible && sigma[slot] > 0.0 {
            ucols.push(cols[j].iter().map(|x| x / sigma[slot]).collect());
        } else {
            ucols.push(Vec::new());
            missing.push(slot);
        }
        if want_v {
            vsorted.push(vcols[j].clone());
        }
    }
    if !missing.is_empty() {
        let mut basis: Vec<Vec<f64>> = ucols.iter().filter(|c| !c.is_empty()).cloned().collect();
        complete_orthonormal(&mut basis, m, n);
        let extra = basis.split_off(n - missing.len());
        for (slot, col) in missing.into_iter().zip(extra) {
            ucols[slot] = col;
        }
    }
    for j in 0..n {
        if fix_sign(&mut ucols[j]) && want_v {
            vsorted[j].iter_mut().for_each(|x| *x = -*x);
        }
    }
    let u = DenseMatrix::from_columns(m, &ucols);
    let v = want_v.then(|| DenseMatrix::from_columns(n, &vsorted));
    (u, sigma, v)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Extends an orthonormal set of vectors in `R^dim` to `target` vectors by
/// Gram-Schmidt on the standard basis.
pub(crate) fn complete_orthonormal(basis: &mut Vec<Vec<f64>>, dim: usize, target: usize) {
    assert!(target <= dim);
    let mut k = 0;
    while basis.len() < target && k < dim {
        let mut cand = vec![0.0; dim];
        cand[k] = 1.0;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = dot(&cand, b);
                for (c, bi) in cand.iter_mut().zip(b) {
                    *c -= proj * bi;
                }
            }
        }
        let nrm = norm2(&cand);
        if nrm > 1e-3 {
            cand.iter_mut().for_each(|c| *c /= nrm);
            basis.push(cand);
        }
        k += 1;
    }
    assert_eq!(basis.len(), target, "basis completion failed");
}

fn reassemble(u: &DenseMatrix, sigma: &[f64], v: &DenseMatrix, k: usize) -> DenseMatrix {
    let (m, n) = (u.rows(), v.rows());
    let mut out = DenseMatrix::zeros(m, n);
    for i in 0..m {
        let row = out.row_mut(i);
        for l in 0..k {
            let a = u[(i, l)] * sigma[l];
            if a == 0.0 {
                continue;
            }
            for (j, o) in row.iter_mut().enumerate() {
                *o += a * v[(j, l)];
            }
        }
    }
    out
}

/// Best rank-`k` approximation `U_k·diag(σ_1..k)·V_kᵀ`.
pub fn truncate_rank(s: &SvdResult, k: usize) -> Result<DenseMatrix> {
    let r = s.sigma.len();
    if k == 0 || k > r {
        return input(format!("rank {k} outside 1..={r}"));
    }
    Ok(reassemble(&s.u, &s.sigma, &s.v, k))
}

/// Applies hard or soft thresholding to the singular values of `m` and
/// rebuilds the matrix.
pub fn sv_threshold(m: &DenseMatrix, alpha: f64, mode: ThresholdMode) -> Result<DenseMatrix> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return input(format!("threshold must be finite and >= 0, got {alpha}"));
    }
    let s = svd(m)?;
    let shrunk: Vec<f64> = s
        .sigma
        .iter()
        .map(|&x| match mode {
            ThresholdMode::Soft => (x - alpha).max(0.0),
            ThresholdMode::Hard if x < alpha => 0.0,
            ThresholdMode::Hard => x,
        })
        .collect();
    Ok(reassemble(&s.u, &shrunk, &s.v, shrunk.len()))
}

/// The `k` largest singular values, descending.
pub fn top_singular_values(m: &DenseMatrix, k: usize) -> Result<Vec<f64>> {
    let r = m.rows().min(m.cols());
    if k > r {
        return input(format!("asked for {k} singular values of a rank-{r} shape"));
    }
    let mut s = singular_values(m)?;
    s.truncate(k);
    Ok(s)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}
