//! Sparse linear regression with an L0 penalty.
//!
//! The Lasso (`lasso`) supplies a convex starting point; `lass0` then runs a
//! stepwise add/remove search on the L0-penalized least-squares objective
//! from that point. `oracle` holds exact reference solvers, `data` the
//! instance generators, and `eval` the cross-validated comparison harness.

pub mod data;
pub mod error;
pub mod eval;
pub mod lass0;
pub mod lasso;
pub mod linalg;
pub mod oracle;

pub use error::{Error, Result};
pub use lass0::{
    l0_objective, lass0_fit, lass0_pipeline, lass0_pipeline_detailed, Lass0Config, SparseSolution,
    StepTrace, TieBreak,
};
pub use lasso::{fit_lasso, lasso_path, soft_threshold, LambdaGrid, LassoConfig, LassoFit};
pub use linalg::{residual_loss, restricted_ols, DenseMatrix, DenseVector, SolverConfig, SupportSet};
