//! Latent-rank estimation and pyramidal width planning.
//!
//! A layer's width is taken from the numerical rank of an observed matrix
//! (input features or hidden activations): the smallest `k` whose leading
//! singular values carry a chosen fraction of the spectral energy. When
//! entries are missing, [`complete_matrix`] fills them by nuclear-norm
//! regularised least squares, solved with proximal gradient steps whose
//! proximal map is soft singular value thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::linalg::{nuclear_norm, singular_values, sv_threshold, DenseMatrix, ThresholdMode};

pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.99;

/// Layer widths, front to back, non-increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthPlan {
    pub widths: Vec<usize>,
    /// Rank estimates before the monotone and floor adjustments.
    pub source_ranks: Vec<usize>,
    pub energy_threshold: f64,
}

impl WidthPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| crate::Error::Format(e.to_string()))
    }

    /// Whether the raw rank estimates already shrink front to back.
    pub fn naturally_shrinking(&self) -> bool {
        self.source_ranks.windows(2).all(|w| w[0] >= w[1])
    }
}

/// Smallest `k ≥ 1` with `Σ_{i≤k} σᵢ² ≥ threshold · Σ σᵢ²`.
///
/// An all-zero spectrum gives 1.
pub fn estimate_rank(sigma: &[f64], energy_threshold: f64) -> Result<usize> {
    if sigma.is_empty() {
        return input("empty singular value list");
    }
    if !(energy_threshold > 0.0 && energy_threshold <= 1.0) {
        return input(format!(
            "energy threshold {energy_threshold} outside (0, 1]"
        ));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(1);
    }
    let target = energy_threshold * total;
    let mut cum = 0.0;
    for (k, s) in sigma.iter().enumerate() {
        cum += s * s;
        if cum >= target {
            return Ok(k + 1);
        }
    }
    Ok(sigma.len())
}

/// Entry-sampled nuclear-norm regularised recovery problem.
#[derive(Clone, Debug)]
pub struct CompletionProblem {
    pub observed: DenseMatrix,
    /// Row-major, same shape as `observed`; `true` marks an observed entry.
    pub mask: Vec<bool>,
    pub alpha: f64,
    /// Gradient step. The objective decreases monotonically for `step ≤ 1`.
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl CompletionProblem {
    pub fn new(observed: DenseMatrix, mask: Vec<bool>, alpha: f64) -> Result<Self> {
        let p = Self {
            observed,
            mask,
            alpha,
            step: 1.0,
            max_iters: 10_000,
            tol: 1e-10,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.mask.len() != self.observed.rows() * self.observed.cols() {
            return input("mask shape does not match the observed matrix");
        }
        if !self.mask.iter().any(|&b| b) {
            return input("mask has no observed entries");
        }
        if !(self.alpha > 0.0) || !(self.step > 0.0) {
            return input("alpha and step must be positive");
        }
        Ok(())
    }

    /// `½‖mask⊙(X − observed)‖_F² + α‖X‖_*`.
    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        let fit: f64 = x
            .as_slice()
            .iter()
            .zip(self.observed.as_slice())
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((a, b), _)| (a - b) * (a - b))
            .sum();
        Ok(0.5 * fit + self.alpha * nuclear_norm(x)?)
    }
}

#[derive(Clone, Debug)]
pub struct CompletionResult {
    pub matrix: DenseMatrix,
    pub iterations: usize,
    /// `false` when `max_iters` was reached before the change fell below `tol`.
    pub converged: bool,
    /// Objective at the start and after every iteration.
    pub objective_history: Vec<f64>,
}

/// Proximal gradient on the nuclear-norm relaxation, starting from zero:
/// `X ← SVT_soft(X − step·mask⊙(X − observed), step·α)`.
pub fn complete_matrix(p: &CompletionProblem) -> Result<CompletionResult> {
    p.validate()?;
    let (rows, cols) = p.observed.shape();
    let mut x = DenseMatrix::zeros(rows, cols);
    let mut history = vec![p.objective(&x)?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < p.max_iters {
        iterations += 1;
        let mut g = x.clone();
        for ((gi, &oi), &m) in g
            .as_mut_slice()
            .iter_mut()
            .zip(p.observed.as_slice())
            .zip(&p.mask)
        {
            if m {
                *gi -= p.step * (*gi - oi);
            }
        }
        let next = sv_threshold(&g, p.step * p.alpha, ThresholdMode::Soft)?;
        let change = next.sub(&x)?.frobenius_norm();
        x = next;
        history.push(p.objective(&x)?);
        if change <= p.tol {
            converged = true;
            break;
        }
    }
    Ok(CompletionResult {
        matrix: x,
        iterations,
        converged,
        objective_history: history,
    })
}

/// Rank of each activation matrix, made non-increasing by a running
/// minimum and floored at `min_width`.
pub fn plan_widths(
    activations: &[DenseMatrix],
    energy_threshold: f64,
    min_width: usize,
) -> Result<WidthPlan> {
    if activations.is_empty() {
        return input("no activation matrices to plan from");
    }
    let mut ranks = Vec::with_capacity(activations.len());
    for a in activations {
        ranks.push(estimate_rank(&singular_values(a)?, energy_threshold)?);
    }
    Ok(plan_from_ranks(ranks, energy_threshold, min_width))
}

pub(crate) fn plan_from_ranks(
    ranks: Vec<usize>,
    energy_threshold: f64,
    min_width: usize,
) -> WidthPlan {
    let mut widths = Vec::with_capacity(ranks.len());
    let mut running = usize::MAX;
    for &r in &ranks {
        running = running.min(r);
        widths.push(running.max(min_width).max(1));
    }
    WidthPlan {
        widths,
        source_ranks: ranks,
        energy_threshold,
    }
}
