//! Ground-truth solvers for verification: exhaustive best-subset search and
//! the closed-form orthonormal-design solutions.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::lass0::l0_objective;
use crate::lasso::soft_threshold;
use crate::linalg::{DenseMatrix, DenseVector, FactorState, NormalEquations, SolverConfig, SupportSet};

pub mod suites;

/// Largest feature count accepted by [`exhaustive_l0`] by default.
pub const DEFAULT_MAX_P: usize = 20;

/// Above this many features the enumeration walks subsets in Gray-code
/// order, updating one factorization instead of refactoring each subset.
const GRAY_CODE_ABOVE: usize = 12;

/// Refactor from scratch this often along the Gray-code walk.
const GRAY_REFRESH: u64 = 1 << 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub beta: DenseVector,
    pub objective: f64,
    pub subsets_examined: u64,
}

struct Best {
    support: SupportSet,
    beta: DenseVector,
    objective: f64,
}

impl Best {
    /// Lower objective wins; near-equal objectives go to the smaller, then
    /// lexicographically smaller, support.
    fn offer(&mut self, support: &SupportSet, beta: DenseVector, objective: f64) {
        let window = 1e-12 * self.objective.abs().max(1.0);
        let better = if objective < self.objective - window {
            true
        } else if objective <= self.objective + window {
            (support.len(), support.indices()) < (self.support.len(), self.support.indices())
        } else {
            false
        };
        if better {
            self.support = support.clone();
            self.beta = beta;
            self.objective = objective;
        }
    }
}

/// Global minimizer of `½‖y − Xβ‖² + λ‖β‖₀` over all `2^p` supports.
pub fn exhaustive_l0(
    x: &DenseMatrix,
    y: &DenseVector,
    lambda: f64,
    max_p: usize,
) -> Result<OracleResult> {
    let p = x.cols();
    if p > max_p || p >= 64 {
        return Err(Error::TooManyFeatures { p, max_p });
    }
    ensure(lambda.is_finite() && lambda >= 0.0, || {
        format!("lambda must be finite and nonnegative, got {lambda}")
    })?;
    let ne = NormalEquations::new(x, y)?;
    let cfg = SolverConfig::default();
    let empty = SupportSet::empty(p);
    let zero = DenseVector::zeros(p);
    let mut best = Best {
        objective: l0_objective(x, y, &zero, lambda)?,
        support: empty.clone(),
        beta: zero,
    };
    let total: u64 = 1 << p;

    if p <= GRAY_CODE_ABOVE {
        for mask in 1..total {
            let support = SupportSet::from_mask(mask, p);
            let beta = FactorState::new(&ne, &support, &cfg)?.solve();
            let obj = l0_objective(x, y, &beta, lambda)?;
            best.offer(&support, beta, obj);
        }
    } else {
        let mut state = FactorState::new(&ne, &empty, &cfg)?;
        let mut gray = 0u64;
        for step in 1..total {
            let bit = step.trailing_zeros() as usize;
            gray ^= 1 << bit;
            state = if step % GRAY_REFRESH == 0 {
                FactorState::new(&ne, &SupportSet::from_mask(gray, p), &cfg)?
            } else {
                state.gram_update(&ne, bit, &cfg)?
            };
            let beta = state.solve();
            let obj = l0_objective(x, y, &beta, lambda)?;
            best.offer(&state.support(), beta, obj);
        }
    }
    Ok(OracleResult {
        beta: best.beta,
        objective: best.objective,
        subsets_examined: total,
    })
}

/// Keeps `(X^T y)_j` when its magnitude exceeds `√(2λ)`, else zero.
pub fn hard_threshold_oracle(xty: &DenseVector, lambda: f64) -> DenseVector {
    let level = (2.0 * lambda).sqrt();
    let data = xty
        .iter()
        .map(|&z| if z.abs() > level { z } else { 0.0 })
        .collect();
    DenseVector::new(data).expect("thresholding preserves finiteness")
}

/// Component-wise soft thresholding of `X^T y` at `λ`.
pub fn soft_threshold_oracle(xty: &DenseVector, lambda: f64) -> DenseVector {
    let data = xty.iter().map(|&z| soft_threshold(z, lambda)).collect();
    DenseVector::new(data).expect("thresholding preserves finiteness")
}
