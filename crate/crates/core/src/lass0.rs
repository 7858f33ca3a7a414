//! Stepwise L0 local search warm-started from a Lasso solution.
//!
//! Starting from least squares on the Lasso support, every iteration scores
//! each single-feature change of the support (drop an active feature or add
//! an inactive one), each refit by restricted least squares, and moves to the
//! best one if it lowers `½‖y − Xβ‖² + λ‖β‖₀` by at least
//! `min_improvement`. The search stops at the first iteration with no such
//! move, which makes the result a local optimum under single swaps in or out.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::lasso::{fit_lasso, LassoConfig, LassoFit};
use crate::linalg::{
    center_problem, residual_loss, restricted_ols, DenseMatrix, DenseVector, FactorState, NormalEquations,
    SolverConfig, SupportSet,
};

/// Coefficients with their support, penalty, and L0 objective.
///
/// `objective` is `½‖y − intercept − Xβ‖² + lambda·|support|` on the data the
/// solution was fitted to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    pub beta: DenseVector,
    pub support: SupportSet,
    pub intercept: f64,
    pub lambda: f64,
    pub objective: f64,
    pub converged: bool,
}

impl SparseSolution {
    /// Derives the support and objective from `beta`.
    pub fn from_beta(
        x: &DenseMatrix,
        y: &DenseVector,
        beta: DenseVector,
        intercept: f64,
        lambda: f64,
        converged: bool,
    ) -> Result<Self> {
        let objective = objective_with_intercept(x, y, &beta, intercept, lambda)?;
        Ok(Self {
            support: SupportSet::of(&beta),
            beta,
            intercept,
            lambda,
            objective,
            converged,
        })
    }

    /// Objective recomputed from the stored fields.
    pub fn recompute_objective(&self, x: &DenseMatrix, y: &DenseVector) -> Result<f64> {
        objective_with_intercept(x, y, &self.beta, self.intercept, self.lambda)
    }

    /// `intercept + Xβ`.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseVector> {
        let fitted = x.mul_vec(&self.beta)?;
        DenseVector::new(fitted.iter().map(|v| v + self.intercept).collect())
    }
}

fn objective_with_intercept(
    x: &DenseMatrix,
    y: &DenseVector,
    beta: &DenseVector,
    intercept: f64,
    lambda: f64,
) -> Result<f64> {
    if intercept == 0.0 {
        return l0_objective(x, y, beta, lambda);
    }
    let shifted = DenseVector::new(y.iter().map(|v| v - intercept).collect())?;
    l0_objective(x, &shifted, beta, lambda)
}

/// `½‖y − Xβ‖² + λ·‖β‖₀`, counting exact nonzeros.
pub fn l0_objective(x: &DenseMatrix, y: &DenseVector, beta: &DenseVector, lambda: f64) -> Result<f64> {
    ensure(lambda.is_finite() && lambda >= 0.0, || {
        format!("lambda must be finite and nonnegative, got {lambda}")
    })?;
    Ok(residual_loss(x, y, beta)? + lambda * beta.count_nonzero() as f64)
}

/// Order in which equally scored candidates are preferred.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Lowest feature index wins.
    #[default]
    LowestIndex,
    /// Any removal beats any addition; lowest index within each kind.
    RemovalsFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lass0Config {
    pub lambda: f64,
    /// Penalty for the Lasso initialization; `lambda` when unset.
    pub init_lambda: Option<f64>,
    /// Smallest objective decrease that counts as an improvement.
    pub min_improvement: f64,
    /// Step cap; `10 * p` when unset.
    pub max_steps: Option<usize>,
    pub tie_break: TieBreak,
    pub solver: SolverConfig,
}

impl Default for Lass0Config {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            init_lambda: None,
            min_improvement: 1e-10,
            max_steps: None,
            tie_break: TieBreak::LowestIndex,
            solver: SolverConfig::default(),
        }
    }
}

impl Lass0Config {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lambda.is_finite() && self.lambda >= 0.0, || {
            format!("lambda must be finite and nonnegative, got {}", self.lambda)
        })?;
        if let Some(l) = self.init_lambda {
            ensure(l.is_finite() && l >= 0.0, || {
                format!("init_lambda must be finite and nonnegative, got {l}")
            })?;
        }
        ensure(self.min_improvement > 0.0, || {
            format!("min_improvement must be positive, got {}", self.min_improvement)
        })?;
        ensure(self.max_steps != Some(0), || "max_steps must be at least 1".into())?;
        self.solver.validate()
    }

    fn step_cap(&self, p: usize) -> usize {
        self.max_steps.unwrap_or(10 * p).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Add,
    Remove,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub action: StepAction,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Accepted moves in order, plus the objective of the least-squares polished
/// initialization they start from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub initial_objective: f64,
    pub steps: Vec<Step>,
}

impl StepTrace {
    /// Checks that every step lowers the objective by at least `min_improvement`
    /// and that consecutive steps chain.
    pub fn is_strictly_decreasing(&self, min_improvement: f64) -> bool {
        let mut prev = self.initial_objective;
        self.steps.iter().all(|s| {
            let ok = s.objective_before == prev && s.objective_after <= s.objective_before - min_improvement;
            prev = s.objective_after;
            ok
        })
    }
}

/// A single add/remove move and the objective it reaches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub index: usize,
    pub action: StepAction,
    pub objective: f64,
}

struct Candidate {
    index: usize,
    action: StepAction,
    objective: f64,
    beta: DenseVector,
    state: FactorState,
}

fn candidate_order(support: &SupportSet, p: usize, rule: TieBreak) -> Vec<usize> {
    match rule {
        TieBreak::LowestIndex => (0..p).collect(),
        TieBreak::RemovalsFirst => support
            .iter()
            .chain((0..p).filter(|j| !support.contains(*j)))
            .collect(),
    }
}

/// Runs the stepwise search from the support of `init`.
pub fn lass0_fit(
    x: &DenseMatrix,
    y: &DenseVector,
    init: &SparseSolution,
    cfg: &Lass0Config,
) -> Result<(SparseSolution, StepTrace)> {
    cfg.validate()?;
    let p = x.cols();
    if init.beta.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "initial coefficients have length {} for {p} columns",
            init.beta.len()
        )));
    }
    let ne = NormalEquations::new(x, y)?;
    let solver = &cfg.solver;
    let lambda = cfg.lambda;

    let mut state = FactorState::new(&ne, &SupportSet::of(&init.beta), solver)?;
    let mut beta = state.solve();
    state = resync(&ne, state, &beta, solver)?;
    let mut objective = l0_objective(x, y, &beta, lambda)?;
    let mut trace = StepTrace {
        initial_objective: objective,
        steps: Vec::new(),
    };

    let cap = cfg.step_cap(p);
    let mut converged = false;
    while trace.steps.len() < cap {
        let support = state.support();
        let mut best: Option<Candidate> = None;
        for j in candidate_order(&support, p, cfg.tie_break) {
            let next = state.gram_update(&ne, j, solver)?;
            let b = next.solve();
            let obj = l0_objective(x, y, &b, lambda)?;
            if best.as_ref().is_none_or(|c| obj < c.objective) {
                best = Some(Candidate {
                    index: j,
                    action: if support.contains(j) {
                        StepAction::Remove
                    } else {
                        StepAction::Add
                    },
                    objective: obj,
                    beta: b,
                    state: next,
                });
            }
        }
        let Some(c) = best.filter(|c| c.objective <= objective - cfg.min_improvement) else {
            converged = true;
            break;
        };
        trace.steps.push(Step {
            index: c.index,
            action: c.action,
            objective_before: objective,
            objective_after: c.objective,
        });
        objective = c.objective;
        state = resync(&ne, c.state, &c.beta, solver)?;
        beta = c.beta;
    }
    if !converged {
        // The cap may coincide with a local optimum.
        converged = best_single_move(x, y, &beta, lambda, cfg)?
            .is_none_or(|m| m.objective > objective - cfg.min_improvement);
    }

    let solution = SparseSolution {
        support: SupportSet::of(&beta),
        beta,
        intercept: 0.0,
        lambda,
        objective,
        converged,
    };
    Ok((solution, trace))
}

/// Refactors when a refit left an exact zero inside the factored support, so
/// that the working support always equals the nonzeros of `beta`.
fn resync(
    ne: &NormalEquations,
    state: FactorState,
    beta: &DenseVector,
    solver: &SolverConfig,
) -> Result<FactorState> {
    let nonzero = SupportSet::of(beta);
    if nonzero == state.support() {
        Ok(state)
    } else {
        FactorState::new(ne, &nonzero, solver)
    }
}

/// Best single add/remove move from `beta`'s support, each candidate refit
/// from scratch. `None` only when there are no features.
pub fn best_single_move(
    x: &DenseMatrix,
    y: &DenseVector,
    beta: &DenseVector,
    lambda: f64,
    cfg: &Lass0Config,
) -> Result<Option<Move>> {
    let support = SupportSet::of(beta);
    let mut best: Option<Move> = None;
    for j in candidate_order(&support, x.cols(), cfg.tie_break) {
        let b = restricted_ols(x, y, &support.toggled(j), &cfg.solver)?;
        let obj = l0_objective(x, y, &b, lambda)?;
        if best.as_ref().is_none_or(|m| obj < m.objective) {
            best = Some(Move {
                index: j,
                action: if support.contains(j) {
                    StepAction::Remove
                } else {
                    StepAction::Add
                },
                objective: obj,
            });
        }
    }
    Ok(best)
}

/// Everything produced by one Lasso-then-stepwise run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub lasso: LassoFit,
    /// L0 objective of least squares on the Lasso support.
    pub polished_init_objective: f64,
    pub solution: SparseSolution,
    pub trace: StepTrace,
}

/// Lasso at `init_lambda` (default `lambda`), then the stepwise search at
/// `lambda`. When the Lasso standardizes, the search runs on centered data
/// and the returned intercept restores the means.
pub fn lass0_pipeline_detailed(
    x: &DenseMatrix,
    y: &DenseVector,
    lambda: f64,
    cfg: &Lass0Config,
    lasso_cfg: &LassoConfig,
) -> Result<PipelineOutcome> {
    let cfg = Lass0Config {
        lambda,
        ..cfg.clone()
    };
    cfg.validate()?;
    let lasso_cfg = LassoConfig {
        lambda: cfg.init_lambda.unwrap_or(lambda),
        ..lasso_cfg.clone()
    };
    let lasso = fit_lasso(x, y, &lasso_cfg)?;

    let (solution, trace) = if lasso_cfg.standardize {
        let (xc, yc, x_mean, y_mean) = center_problem(x, y)?;
        let (s, trace) = lass0_fit(&xc, &yc, &lasso.solution, &cfg)?;
        let intercept = y_mean
            - s.beta
                .iter()
                .zip(&x_mean)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        let mut solution = SparseSolution::from_beta(x, y, s.beta, intercept, lambda, s.converged)?;
        // Same value as the uncentered loss with this intercept; keeping the
        // centered evaluation makes it comparable with the trace.
        solution.objective = s.objective;
        (solution, trace)
    } else {
        lass0_fit(x, y, &lasso.solution, &cfg)?
    };
    Ok(PipelineOutcome {
        polished_init_objective: trace.initial_objective,
        lasso,
        solution,
        trace,
    })
}

pub fn lass0_pipeline(
    x: &DenseMatrix,
    y: &DenseVector,
    lambda: f64,
    cfg: &Lass0Config,
    lasso_cfg: &LassoConfig,
) -> Result<SparseSolution> {
    Ok(lass0_pipeline_detailed(x, y, lambda, cfg, lasso_cfg)?.solution)
}
