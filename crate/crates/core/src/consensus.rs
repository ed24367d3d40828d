//! Linear consensus dynamics `x(t+1) = A·x(t)`.
//!
//! When `A` is doubly stochastic and the underlying graph is connected, every
//! state converges to the average of the initial values. The canonical
//! choice is `A = I − εL` for a graph Laplacian `L`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::graph::{complement_basis, WeightedGraph};
use crate::linalg::{
    format_f64, parse_f64, parse_matrix_prefix, singular_values, sym_eig, DenseMatrix,
};

/// Norm beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;
const SYMMETRIC_TOL: f64 = 1e-9;
/// Precision of the spectral radius estimate for non-symmetric matrices.
pub const GENERAL_TOL: f64 = 1e-6;
const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusSystem {
    a: DenseMatrix,
    x0: Vec<f64>,
}

impl ConsensusSystem {
    pub fn new(a: DenseMatrix, x0: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return input(format!(
                "consensus matrix must be square, got {:?}",
                a.shape()
            ));
        }
        if x0.len() != a.rows() {
            return input(format!(
                "x0 has {} entries for a {}-agent system",
                x0.len(),
                a.rows()
            ));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return input("x0 must be finite");
        }
        Ok(Self { a, x0 })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn n(&self) -> usize {
        self.x0.len()
    }

    /// `x' = A·x`.
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.a.matvec(x)
    }

    /// The matrix in text form followed by one line holding `x0`.
    pub fn from_text(text: &str) -> Result<Self> {
        let (a, rest) = parse_matrix_prefix(text)?;
        let mut lines = rest.into_iter().filter(|l| !l.trim().is_empty());
        let line = lines
            .next()
            .ok_or_else(|| Error::Format("missing x0 line after the matrix".into()))?;
        if lines.next().is_some() {
            return Err(Error::Format("unexpected lines after x0".into()));
        }
        let x0 = line
            .split_whitespace()
            .map(parse_f64)
            .collect::<Result<Vec<_>>>()?;
        Self::new(a, x0).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = self.a.to_text();
        let cells: Vec<String> = self.x0.iter().map(|&v| format_f64(v)).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
        s
    }
}

/// `I − εL` for the graph Laplacian `L` (raw weights). The default gain is
/// `1/(d_max + 1)`, which keeps every eigenvalue in `(−1, 1]` for
/// non-negative weights.
pub fn consensus_matrix(graph: &WeightedGraph, eps: Option<f64>) -> Result<DenseMatrix> {
    let eps = match eps {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return input(format!("step gain must be positive, got {e}")),
        None => {
            let d_max = graph.degrees().into_iter().fold(0.0, f64::max);
            1.0 / (d_max + 1.0)
        }
    };
    DenseMatrix::identity(graph.n()).sub(&graph.laplacian().scale(eps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Marginal,
    Diverges,
}

/// Which convergence guarantee applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Rows and columns sum to 1: the limit, if reached, is the average.
    DoublyStochastic,
    /// Rows sum to 1: constants are fixed points, the limit is a weighted
    /// average.
    RowStochastic,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    pub verdict: Verdict,
    pub regime: Regime,
    /// Exact for symmetric `A`, otherwise an estimate within [`GENERAL_TOL`].
    pub spectral_radius: f64,
    /// Spectral radius of `A` on the complement of `1`, when `A·1 = 1`.
    pub subdominant_radius: Option<f64>,
    pub symmetric: bool,
}

fn row_stochastic(a: &DenseMatrix) -> bool {
    (0..a.rows()).all(|i| (a.row(i).iter().sum::<f64>() - 1.0).abs() <= STOCHASTIC_TOL)
}

pub fn regime(a: &DenseMatrix) -> Regime {
    if !row_stochastic(a) {
        Regime::General
    } else if row_stochastic(&a.transpose()) {
        Regime::DoublyStochastic
    } else {
        Regime::RowStochastic
    }
}

/// `max |λᵢ|`: exact eigenvalues for symmetric input, otherwise the Gelfand
/// limit `‖A^k‖^{1/k}` with `k = 2^40` by repeated squaring, capped by `σ_max`.
pub fn spectral_radius(a: &DenseMatrix) -> Result<f64> {
    if !a.is_square() {
        return input("spectral radius needs a square matrix");
    }
    if a.rows() == 0 {
        return Ok(0.0);
    }
    if a.is_symmetric(0.0) {
        let e = sym_eig(a)?;
        return Ok(e.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    let sigma_max = singular_values(a)?[0];
    // log‖A^(2^k)‖ / 2^k, with the power renormalised at every squaring
    let mut b = a.clone();
    let mut log_scale = 0.0;
    let mut estimate = sigma_max.ln();
    for k in 1..=40 {
        b = b.matmul_unchecked(&b);
        let nrm = b.frobenius_norm();
        if nrm == 0.0 || !nrm.is_finite() {
            if nrm == 0.0 {
                return Ok(0.0);
            }
            break;
        }
        b = b.scale(1.0 / nrm);
        log_scale = 2.0 * log_scale + nrm.ln();
        estimate = log_scale / 2f64.powi(k);
    }
    Ok(estimate.exp().min(sigma_max))
}

/// Classifies `x(t+1) = A·x(t)`.
///
/// Converges when every eigenvalue has modulus below 1, or when `A·1 = 1`
/// and every other eigenvalue has modulus below 1 (consensus). Diverges when
/// some modulus exceeds 1 beyond the tolerance; marginal otherwise.
pub fn spectral_convergence_check(a: &DenseMatrix) -> Result<SpectralReport> {
    if !a.is_square() {
        return input(format!(
            "consensus matrix must be square, got {:?}",
            a.shape()
        ));
    }
    let symmetric = a.is_symmetric(0.0);
    let tol = if symmetric {
        SYMMETRIC_TOL
    } else {
        GENERAL_TOL
    };
    let rho = spectral_radius(a)?;
    let regime = regime(a);
    let subdominant = if regime != Regime::General && a.rows() >= 2 {
        // span{1} is invariant, so the remaining spectrum is that of ŨᵀAŨ
        let u = complement_basis(a.rows())?;
        let restricted = u.tr_matmul(&a.matmul_unchecked(&u));
        let restricted = if symmetric {
            // exact symmetry for the eigensolver
            restricted.add(&restricted.transpose())?.scale(0.5)
        } else {
            restricted
        };
        Some(spectral_radius(&restricted)?)
    } else if regime != Regime::General {
        Some(0.0)
    } else {
        None
    };
    let verdict = if rho > 1.0 + tol {
        Verdict::Diverges
    } else if rho < 1.0 - tol || subdominant.is_some_and(|s| s < 1.0 - tol) {
        Verdict::Converges
    } else {
        Verdict::Marginal
    };
    Ok(SpectralReport {
        verdict,
        regime,
        spectral_radius: rho,
        subdominant_radius: subdominant,
        symmetric,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusRun {
    pub x: Vec<f64>,
    pub steps: usize,
    /// Doubly stochastic systems: every state within `tol` of the initial
    /// mean. Otherwise: all states within `tol` of each other.
    pub reached: bool,
    /// `x(0), …, x(steps)` when recorded, else empty.
    pub trajectory: Vec<Vec<f64>>,
}

/// Iterates until the states reach the initial mean (doubly stochastic
/// systems), stop changing by more than `tol/10`, or `max_steps` is hit.
pub fn run_to_consensus(sys: &ConsensusSystem, tol: f64, max_steps: usize) -> Result<ConsensusRun> {
    simulate(sys, tol, max_steps, false)
}

/// [`run_to_consensus`], optionally keeping every intermediate state.
pub fn simulate(
    sys: &ConsensusSystem,
    tol: f64,
    max_steps: usize,
    record: bool,
) -> Result<ConsensusRun> {
    if !(tol > 0.0) {
        return input("tolerance must be positive");
    }
    let n = sys.n();
    let doubly = regime(&sys.a) == Regime::DoublyStochastic;
    let mean = if n == 0 {
        0.0
    } else {
        sys.x0.iter().sum::<f64>() / n as f64
    };
    let at_mean = |x: &[f64]| x.iter().all(|v| (v - mean).abs() <= tol);
    let agreed = |x: &[f64]| {
        if doubly {
            at_mean(x)
        } else {
            let (lo, hi) = x
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            n == 0 || hi - lo <= tol
        }
    };
    let mut x = sys.x0.clone();
    let mut trajectory = Vec::new();
    if record {
        trajectory.push(x.clone());
    }
    let mut steps = 0;
    while steps < max_steps && !(doubly && at_mean(&x)) {
        let next = sys.step(&x)?;
        steps += 1;
        let norm = next.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Diverged(format!(
                "state norm {norm:e} exceeds {DIVERGENCE_NORM:e} after {steps} steps"
            )));
        }
        let change = next
            .iter()
            .zip(&x)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        x = next;
        if record {
            trajectory.push(x.clone());
        }
        if change <= tol / 10.0 {
            break;
        }
    }
    Ok(ConsensusRun {
        reached: agreed(&x),
        x,
        steps,
        trajectory,
    })
}

/// `U·(I − εΛ)^t·Uᵀ·x0` for symmetric `L = U·Λ·Uᵀ`: the closed form of `t`
/// steps of `x ← (I − εL)·x`.
pub fn spectral_iterate(l: &DenseMatrix, eps: f64, x0: &[f64], t: u32) -> Result<Vec<f64>> {
    let e = sym_eig(l)?;
    if x0.len() != l.rows() {
        return input("x0 length does not match the matrix");
    }
    let coords = e.vectors.transpose().matvec(x0)?;
    let scaled: Vec<f64> = coords
        .iter()
        .zip(&e.values)
        .map(|(c, lam)| c * (1.0 - eps * lam).powi(t as i32))
        .collect();
    e.vectors.matvec(&scaled)
}

/// `step,x_0,…,x_{n-1}`
pub fn trajectory_csv(trajectory: &[Vec<f64>]) -> String {
    let n = trajectory.first().map_or(0, Vec::len);
    let mut s = String::from("step");
    for i in 0..n {
        write!(s, ",x_{i}").unwrap();
    }
    s.push('\n');
    for (t, x) in trajectory.iter().enumerate() {
        write!(s, "{t}").unwrap();
        for v in x {
            write!(s, ",{}", format_f64(*v)).unwrap();
        }
        s.push('\n');
    }
    s
}
