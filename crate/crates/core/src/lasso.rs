//! L1-regularized least squares by cyclic coordinate descent.
//!
//! With `standardize` on, `y` is centered and the columns of `X` are centered
//! and scaled to unit Euclidean norm before solving
//! `½‖y − Xβ‖² + λ‖β‖₁`; the intercept is never penalized and coefficients
//! are mapped back to the original column scale on output. With it off the
//! problem is solved exactly as given, without an intercept.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::lass0::SparseSolution;
use crate::linalg::{axpy, dot, DenseMatrix, DenseVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Cap on coordinate sweeps.
    pub max_iters: usize,
    /// Convergence when no coefficient moves by more than this in a sweep.
    pub coef_tol: f64,
    pub standardize: bool,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_iters: 10_000,
            coef_tol: 1e-8,
            standardize: true,
        }
    }
}

impl LassoConfig {
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
        ensure(self.max_iters >= 1, || "max_iters must be at least 1".into())?;
        ensure(self.coef_tol > 0.0, || {
            format!("coef_tol must be positive, got {}", self.coef_tol)
        })
    }
}

/// Strictly decreasing positive penalty values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure(!values.is_empty(), || "lambda grid is empty".into())?;
        ensure(values.iter().all(|v| v.is_finite() && *v > 0.0), || {
            "lambda grid values must be finite and positive".into()
        })?;
        ensure(values.windows(2).all(|w| w[0] > w[1]), || {
            "lambda grid must be strictly decreasing".into()
        })?;
        Ok(Self { values })
    }

    /// `count` log-spaced values from `max` down to `min_ratio * max`.
    pub fn log_spaced(max: f64, min_ratio: f64, count: usize) -> Result<Self> {
        ensure(count >= 1, || "grid needs at least one value".into())?;
        ensure(min_ratio > 0.0 && min_ratio < 1.0, || {
            format!("min_ratio must lie in (0, 1), got {min_ratio}")
        })?;
        if count == 1 {
            return Self::new(vec![max]);
        }
        let (hi, lo) = (max.ln(), (max * min_ratio).ln());
        let step = (hi - lo) / (count - 1) as f64;
        Self::new((0..count).map(|k| (hi - step * k as f64).exp()).collect())
    }

    /// 100 values from `lambda_max` down to `1e-3 * lambda_max`.
    pub fn default_for(x: &DenseMatrix, y: &DenseVector, standardize: bool) -> Result<Self> {
        let max = lambda_max(x, y, standardize)?;
        ensure(max > 0.0, || {
            "response is orthogonal to every feature; no penalty grid exists".into()
        })?;
        Self::log_spaced(max, 1e-3, 100)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Self {
        g.values
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Centered, unit-norm copy of a problem together with the maps back to
/// the original scale. The identity transform when not standardizing.
#[derive(Clone, Debug)]
pub struct Standardized {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    scale: Vec<f64>,
    y_mean: f64,
}

impl Standardized {
    pub fn new(x: &DenseMatrix, y: &DenseVector, standardize: bool) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "response length {} for {} rows",
                y.len(),
                x.rows()
            )));
        }
        let p = x.cols();
        if !standardize {
            return Ok(Self {
                columns: (0..p).map(|j| x.col(j).to_vec()).collect(),
                y: y.as_slice().to_vec(),
                x_mean: vec![0.0; p],
                scale: vec![1.0; p],
                y_mean: 0.0,
            });
        }
        let n = x.rows() as f64;
        let y_mean = y.mean();
        let mut columns = Vec::with_capacity(p);
        let mut x_mean = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.col(j);
            let mean = col.iter().sum::<f64>() / n;
            let mut c: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let norm = dot(&c, &c).sqrt();
            // Constant columns carry no signal; they stay at zero.
            let s = if norm > 1e-12 * (1.0 + mean.abs()) * n.sqrt() {
                norm
            } else {
                0.0
            };
            if s > 0.0 {
                c.iter_mut().for_each(|v| *v /= s);
            } else {
                c.iter_mut().for_each(|v| *v = 0.0);
            }
            columns.push(c);
            x_mean.push(mean);
            scale.push(s);
        }
        Ok(Self {
            columns,
            y: y.iter().map(|v| v - y_mean).collect(),
            x_mean,
            scale,
            y_mean,
        })
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn features(&self) -> usize {
        self.columns.len()
    }

    /// Maps standardized coefficients to the original scale, returning
    /// `(beta, intercept)`.
    pub fn to_original(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = b
            .iter()
            .zip(&self.scale)
            .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
            .collect();
        let intercept = self.y_mean - dot(&self.x_mean, &beta);
        (beta, intercept)
    }

    pub fn to_standardized(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    fn residual(&self, b: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                axpy(-bj, &self.columns[j], &mut r);
            }
        }
        r
    }
}

/// Output of a single Lasso solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LassoFit {
    pub solution: SparseSolution,
    /// `½‖y − Xβ‖² + λ‖β‖₁` on the standardized problem.
    pub l1_objective: f64,
    /// L1 objective after each sweep.
    pub sweep_objectives: Vec<f64>,
    pub sweeps: usize,
}

/// Smallest penalty at which the all-zero solution is optimal.
pub fn lambda_max(x: &DenseMatrix, y: &DenseVector, standardize: bool) -> Result<f64> {
    let s = Standardized::new(x, y, standardize)?;
    Ok((0..s.features())
        .map(|j| dot(s.column(j), s.response()).abs())
        .fold(0.0, f64::max))
}

pub fn fit_lasso(x: &DenseMatrix, y: &DenseVector, cfg: &LassoConfig) -> Result<LassoFit> {
    cfg.validate()?;
    let s = Standardized::new(x, y, cfg.standardize)?;
    let gram = Gram::for_problem(&s);
    let mut b = vec![0.0; x.cols()];
    let out = coordinate_descent(&s, gram.as_ref(), cfg, &mut b);
    finish(x, y, &s, cfg.lambda, &b, out)
}

/// Solves every grid value in order, warm-starting each from the previous.
pub fn lasso_path(
    x: &DenseMatrix,
    y: &DenseVector,
    grid: &LambdaGrid,
    cfg: &LassoConfig,
) -> Result<Vec<LassoFit>> {
    cfg.validate()?;
    let s = Standardized::new(x, y, cfg.standardize)?;
    let gram = Gram::for_problem(&s);
    let mut b = vec![0.0; x.cols()];
    grid.values()
        .iter()
        .map(|&lambda| {
            let at = LassoConfig { lambda, ..cfg.clone() };
            let out = coordinate_descent(&s, gram.as_ref(), &at, &mut b);
            finish(x, y, &s, lambda, &b, out)
        })
        .collect()
}

/// Precomputed `XᵀX`, `Xᵀy` and `yᵀy`, used instead of a running residual
/// when there are no more columns than rows.
struct Gram {
    p: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
}

impl Gram {
    fn for_problem(s: &Standardized) -> Option<Self> {
        let p = s.features();
        if p > s.response().len() {
            return None;
        }
        let mut xtx = vec![0.0; p * p];
        for j in 0..p {
            for i in 0..=j {
                let v = dot(s.column(i), s.column(j));
                xtx[i + j * p] = v;
                xtx[j + i * p] = v;
            }
        }
        Some(Self {
            p,
            xtx,
            xty: (0..p).map(|j| dot(s.column(j), s.response())).collect(),
            yty: dot(s.response(), s.response()),
        })
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.xtx[j * self.p..(j + 1) * self.p]
    }

    /// `Xᵀ(y − Xb)`.
    fn gradient(&self, b: &[f64]) -> Vec<f64> {
        let mut g = self.xty.clone();
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                axpy(-bj, self.col(j), &mut g);
            }
        }
        g
    }
}

/// What the sweeps keep up to date: the residual itself, or its
/// correlations with every column.
enum Tracked<'a> {
    Residual(Vec<f64>),
    Gradient(&'a Gram, Vec<f64>),
}

impl Tracked<'_> {
    fn correlation(&self, s: &Standardized, j: usize) -> f64 {
        match self {
            Tracked::Residual(r) => dot(s.column(j), r),
            Tracked::Gradient(_, g) => g[j],
        }
    }

    fn shift(&mut self, s: &Standardized, j: usize, delta: f64) {
        match self {
            Tracked::Residual(r) => axpy(-delta, s.column(j), r),
            Tracked::Gradient(gram, g) => axpy(-delta, gram.col(j), g),
        }
    }

    fn objective(&self, b: &[f64], lambda: f64) -> f64 {
        let penalty = lambda * b.iter().map(|v| v.abs()).sum::<f64>();
        match self {
            Tracked::Residual(r) => 0.5 * dot(r, r) + penalty,
            Tracked::Gradient(gram, g) => {
                let bt: f64 = b.iter().zip(gram.xty.iter().zip(g)).map(|(bj, (c, gj))| bj * (c + gj)).sum();
                (0.5 * (gram.yty - bt)).max(0.0) + penalty
            }
        }
    }
}

struct Descent {
    converged: bool,
    sweeps: usize,
    objectives: Vec<f64>,
}

fn l1_objective(r: &[f64], b: &[f64], lambda: f64) -> f64 {
    0.5 * dot(r, r) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic descent: a full pass, then passes over the nonzero coordinates
/// until they settle, then another full pass to confirm.
fn coordinate_descent(s: &Standardized, gram: Option<&Gram>, cfg: &LassoConfig, b: &mut [f64]) -> Descent {
    let p = s.features();
    let norms: Vec<f64> = match gram {
        Some(g) => (0..p).map(|j| g.xtx[j + j * p]).collect(),
        None => (0..p).map(|j| dot(s.column(j), s.column(j))).collect(),
    };
    let mut state = match gram {
        Some(g) => Tracked::Gradient(g, g.gradient(b)),
        None => Tracked::Residual(s.residual(b)),
    };
    let mut objectives = Vec::new();
    let mut sweeps = 0;

    let sweep = |coords: &mut dyn Iterator<Item = usize>, b: &mut [f64], state: &mut Tracked<'_>| {
        let mut max_change: f64 = 0.0;
        for j in coords {
            if norms[j] == 0.0 {
                continue;
            }
            let old = b[j];
            let z = state.correlation(s, j) + norms[j] * old;
            let new = soft_threshold(z, cfg.lambda) / norms[j];
            if new != old {
                state.shift(s, j, new - old);
                b[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    };

    loop {
        if sweeps >= cfg.max_iters {
            return Descent {
                converged: false,
                sweeps,
                objectives,
            };
        }
        // Refresh the tracked quantity so rounding does not accumulate
        // across the whole path.
        state = match state {
            Tracked::Gradient(g, _) => Tracked::Gradient(g, g.gradient(b)),
            Tracked::Residual(_) => Tracked::Residual(s.residual(b)),
        };
        let change = sweep(&mut (0..p), b, &mut state);
        sweeps += 1;
        objectives.push(state.objective(b, cfg.lambda));
        if change < cfg.coef_tol {
            return Descent {
                converged: true,
                sweeps,
                objectives,
            };
        }
        loop {
            if sweeps >= cfg.max_iters {
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
            let change = sweep(&mut active.into_iter(), b, &mut state);
            sweeps += 1;
            objectives.push(state.objective(b, cfg.lambda));
            if change < cfg.coef_tol {
                break;
            }
        }
    }
}

fn finish(
    x: &DenseMatrix,
    y: &DenseVector,
    s: &Standardized,
    lambda: f64,
    b: &[f64],
    out: Descent,
) -> Result<LassoFit> {
    let (beta, intercept) = s.to_original(b);
    let solution =
        SparseSolution::from_beta(x, y, DenseVector::new(beta)?, intercept, lambda, out.converged)?;
    let l1 = l1_objective(&s.residual(b), b, lambda);
    Ok(LassoFit {
        solution,
        l1_objective: l1,
        sweep_objectives: out.objectives,
        sweeps: out.sweeps,
    })
}

/// Largest violation of the Lasso optimality conditions for `beta`
/// (original scale), measured on the standardized problem.
pub fn kkt_violation(
    x: &DenseMatrix,
    y: &DenseVector,
    beta: &DenseVector,
    lambda: f64,
    standardize: bool,
) -> Result<f64> {
    let s = Standardized::new(x, y, standardize)?;
    if beta.len() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient length {} for {} columns",
            beta.len(),
            x.cols()
        )));
    }
    let b = s.to_standardized(beta.as_slice());
    let r = s.residual(&b);
    Ok((0..s.features())
        .map(|j| {
            let g = dot(s.column(j), &r);
            if b[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * b[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vecf(v: &[f64]) -> DenseVector {
        DenseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn soft_threshold_branches() {
        assert_eq!(soft_threshold(3.0, 2.0), 1.0);
        assert_eq!(soft_threshold(-0.5, 2.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 2.0), -1.0);
        assert_eq!(soft_threshold(2.0, 2.0), 0.0);
    }

    #[test]
    fn orthonormal_closed_form() {
        // X = I_3 gives X^T y = y.
        let x = DenseMatrix::identity(3).unwrap();
        let cfg = LassoConfig {
            lambda: 2.0,
            standardize: false,
            ..LassoConfig::default()
        };
        let fit = fit_lasso(&x, &vecf(&[3.0, 1.0, -4.0]), &cfg).unwrap();
        assert_eq!(fit.solution.beta.as_slice(), &[1.0, 0.0, -2.0]);
        assert_eq!(fit.solution.support.indices(), &[0, 2]);
        assert!(fit.solution.converged);
    }

    #[test]
    fn zero_penalty_matches_least_squares() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.2],
            vec![0.3, 1.0],
            vec![-0.5, 0.4],
            vec![0.9, -0.7],
        ])
        .unwrap();
        let y = vecf(&[1.0, 2.0, -0.5, 0.3]);
        let cfg = LassoConfig {
            lambda: 0.0,
            standardize: false,
            ..LassoConfig::default()
        };
        let fit = fit_lasso(&x, &y, &cfg).unwrap();
        let ols = crate::linalg::restricted_ols(
            &x,
            &y,
            &crate::linalg::SupportSet::full(2),
            &Default::default(),
        )
        .unwrap();
        for (a, b) in fit.solution.beta.iter().zip(ols.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn large_penalty_gives_zero() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 2.0],
            vec![0.0, 1.0],
            vec![3.0, -1.0],
        ])
        .unwrap();
        let y = vecf(&[1.0, 0.0, 2.0]);
        let lmax = lambda_max(&x, &y, true).unwrap();
        let fit = fit_lasso(&x, &y, &LassoConfig::with_lambda(lmax)).unwrap();
        assert!(fit.solution.support.is_empty());
        assert_abs_diff_eq!(fit.solution.intercept, 1.0, epsilon = 1e-12);
        assert!(kkt_violation(&x, &y, &fit.solution.beta, lmax, true).unwrap() <= 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(vec![]).is_err());
        assert!(LambdaGrid::new(vec![1.0, 1.0]).is_err());
        assert!(LambdaGrid::new(vec![1.0, -1.0]).is_err());
        let g = LambdaGrid::log_spaced(10.0, 1e-3, 4).unwrap();
        assert_abs_diff_eq!(g.values()[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.values()[3], 0.01, epsilon = 1e-12);
        let json = serde_json::to_string(&g).unwrap();
        assert!(serde_json::from_str::<LambdaGrid>("[1.0, 2.0]").is_err());
        assert_eq!(serde_json::from_str::<LambdaGrid>(&json).unwrap(), g);
    }

    #[test]
    fn config_validation() {
        assert!(fit_lasso(
            &DenseMatrix::identity(2).unwrap(),
            &vecf(&[1.0, 1.0]),
            &LassoConfig::with_lambda(-1.0)
        )
        .is_err());
        let bad = LassoConfig {
            coef_tol: 0.0,
            ..LassoConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.99],
            vec![0.5, 0.52],
            vec![-0.3, -0.28],
            vec![0.2, 0.25],
        ])
        .unwrap();
        let y = vecf(&[1.0, 0.4, -0.2, 0.3]);
        let cfg = LassoConfig {
            lambda: 1e-4,
            max_iters: 1,
            ..LassoConfig::default()
        };
        let fit = fit_lasso(&x, &y, &cfg).unwrap();
        assert!(!fit.solution.converged);
        assert_eq!(fit.sweeps, 1);
    }
}
