//! Dense kernels for least squares restricted to a support set.
//!
//! Coefficients outside the support are never computed, so they are exact
//! zeros. The normal equations of the active columns are factored by
//! Cholesky; single-index support changes are applied to an existing factor
//! by appending a row (addition) or deleting a row followed by a rank-one
//! update of the trailing block (removal). Rank-deficient supports fall back
//! to the minimum-norm solution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Column-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure(rows >= 1 && cols >= 1, || {
            format!("matrix must be at least 1x1, got {rows}x{cols}")
        })?;
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(n * p);
        for j in 0..p {
            data.extend(rows.iter().map(|r| r[j]));
        }
        Self::new(n, p, data)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Self::new(n, p, columns.concat())
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Copies the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for j in 0..self.cols {
            let col = self.col(j);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        Self::new(rows.len(), self.cols, data)
    }

    /// Copies the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        Self::new(self.rows, cols.len(), data)
    }

    /// Returns `X beta`.
    pub fn mul_vec(&self, beta: &DenseVector) -> Result<DenseVector> {
        if beta.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "coefficient length {} for {} columns",
                beta.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                axpy(b, self.col(j), &mut out);
            }
        }
        Ok(DenseVector { data: out })
    }

    /// Returns `X^T v`.
    pub fn tr_mul_vec(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} for {} rows",
                v.len(),
                self.rows
            )));
        }
        let data = (0..self.cols).map(|j| dot(self.col(j), v.as_slice())).collect();
        Ok(DenseVector { data })
    }

    /// Mutable column access for crate-internal generators.
    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.nrows(), m.ncols(), m.as_slice().to_vec())
    }
}

/// Dense vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Self {
        Self { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            data: idx.iter().map(|&i| self.data[i]).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.data.iter().sum::<f64>() / self.data.len() as f64
        }
    }

    /// Number of exactly nonzero entries.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn norm_squared(&self) -> f64 {
        dot(&self.data, &self.data)
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

/// Ordered set of active feature indices within `0..universe`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportSet {
    indices: Vec<usize>,
    universe: usize,
}

impl SupportSet {
    /// Builds a support from arbitrary indices; duplicates are merged.
    pub fn new(mut indices: Vec<usize>, universe: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            ensure(last < universe, || {
                format!("support index {last} outside 0..{universe}")
            })?;
        }
        Ok(Self { indices, universe })
    }

    pub fn empty(universe: usize) -> Self {
        Self {
            indices: Vec::new(),
            universe,
        }
    }

    pub fn full(universe: usize) -> Self {
        Self {
            indices: (0..universe).collect(),
            universe,
        }
    }

    /// Support of a coefficient vector: its exactly nonzero entries.
    pub fn of(beta: &DenseVector) -> Self {
        Self {
            indices: beta
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect(),
            universe: beta.len(),
        }
    }

    /// Support of a subset encoded as a bit mask over the universe.
    pub fn from_mask(mask: u64, universe: usize) -> Self {
        Self {
            indices: (0..universe).filter(|&i| mask >> i & 1 == 1).collect(),
            universe,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    /// Returns the support with `i` added if absent, removed if present.
    pub fn toggled(&self, i: usize) -> Self {
        let mut indices = self.indices.clone();
        match indices.binary_search(&i) {
            Ok(pos) => {
                indices.remove(pos);
            }
            Err(pos) => indices.insert(pos, i),
        }
        Self {
            indices,
            universe: self.universe,
        }
    }

    /// Size of the symmetric difference.
    pub fn symmetric_difference_len(&self, other: &SupportSet) -> usize {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j, mut common) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        a.len() + b.len() - 2 * common
    }
}

/// Numerical guards for the least-squares kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// A Cholesky pivot (or Gram eigenvalue) at or below
    /// `rank_tol * max diag(X_F^T X_F)` marks the support as rank-deficient.
    pub rank_tol: f64,
    /// Agreement expected between an updated factor and a fresh one.
    pub refactor_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            refactor_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.rank_tol > 0.0 && self.rank_tol < 1.0, || {
            format!("rank_tol must lie in (0, 1), got {}", self.rank_tol)
        })?;
        ensure(self.refactor_tol > 0.0, || {
            format!("refactor_tol must be positive, got {}", self.refactor_tol)
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_problem(x: &DenseMatrix, y: &DenseVector) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "response length {} for {} rows",
            y.len(),
            x.rows()
        )));
    }
    Ok(())
}

/// Column-centered copy of `x` and centered `y`, with the removed means.
pub fn center_problem(
    x: &DenseMatrix,
    y: &DenseVector,
) -> Result<(DenseMatrix, DenseVector, Vec<f64>, f64)> {
    check_problem(x, y)?;
    let n = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for j in 0..x.cols() {
        let col = x.col(j);
        let m = col.iter().sum::<f64>() / n;
        means.push(m);
        data.extend(col.iter().map(|v| v - m));
    }
    let y_mean = y.mean();
    let yc = DenseVector::new(y.iter().map(|v| v - y_mean).collect())?;
    Ok((DenseMatrix::new(x.rows(), x.cols(), data)?, yc, means, y_mean))
}

/// Returns `½‖y − Xβ‖²`.
pub fn residual_loss(x: &DenseMatrix, y: &DenseVector, beta: &DenseVector) -> Result<f64> {
    check_problem(x, y)?;
    let fitted = x.mul_vec(beta)?;
    Ok(0.5
        * y.iter()
            .zip(fitted.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
}

/// Least squares over the columns in `support`; all other coefficients are
/// exactly zero. Rank-deficient supports yield the minimum-norm solution.
pub fn restricted_ols(
    x: &DenseMatrix,
    y: &DenseVector,
    support: &SupportSet,
    cfg: &SolverConfig,
) -> Result<DenseVector> {
    check_problem(x, y)?;
    cfg.validate()?;
    if support.universe() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "support over {} features for {} columns",
            support.universe(),
            x.cols()
        )));
    }
    let idx = support.indices();
    let m = idx.len();
    let mut beta = vec![0.0; x.cols()];
    if m == 0 {
        return Ok(DenseVector { data: beta });
    }
    let gram = DMatrix::from_fn(m, m, |a, b| dot(x.col(idx[a]), x.col(idx[b])));
    let rhs: Vec<f64> = idx.iter().map(|&j| dot(x.col(j), y.as_slice())).collect();
    let (coef, _) = solve_normal_equations(&gram, &rhs, cfg.rank_tol);
    for (k, &j) in idx.iter().enumerate() {
        beta[j] = coef[k];
    }
    Ok(DenseVector { data: beta })
}

/// Solves `G b = c`, returning the Cholesky factor when `G` is numerically
/// positive definite and the minimum-norm solution otherwise.
fn solve_normal_equations(
    gram: &DMatrix<f64>,
    rhs: &[f64],
    rank_tol: f64,
) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let floor = rank_tol * max_diag(gram);
    match cholesky_lower(gram, floor) {
        Some(l) => {
            let coef = cholesky_solve(&l, rhs);
            (coef, Some(l))
        }
        None => (min_norm_solve(gram, rhs, floor), None),
    }
}

fn max_diag(g: &DMatrix<f64>) -> f64 {
    (0..g.nrows()).map(|i| g[(i, i)]).fold(0.0, f64::max)
}

/// Lower Cholesky factor, or `None` if a pivot falls to `floor` or below.
fn cholesky_lower(g: &DMatrix<f64>, floor: f64) -> Option<DMatrix<f64>> {
    let m = g.nrows();
    let mut l = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= floor {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..m {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

fn forward_substitute(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let m = l.nrows();
    let mut z = b.to_vec();
    for i in 0..m {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

fn back_substitute_transposed(l: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let m = l.nrows();
    let mut b = z.to_vec();
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    b
}

fn cholesky_solve(l: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    back_substitute_transposed(l, &forward_substitute(l, rhs))
}

/// Pseudo-inverse solve through the eigendecomposition of the Gram matrix.
fn min_norm_solve(gram: &DMatrix<f64>, rhs: &[f64], floor: f64) -> Vec<f64> {
    let eig = SymmetricEigen::new(gram.clone());
    let c = DVector::from_column_slice(rhs);
    let proj = eig.eigenvectors.transpose() * &c;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter().zip(eig.eigenvalues.iter()).map(|(p, &ev)| {
            if ev > floor {
                p / ev
            } else {
                0.0
            }
        }),
    );
    (eig.eigenvectors * scaled).as_slice().to_vec()
}

/// Cross products `X^T X`, `X^T y` shared by every support of one problem.
#[derive(Clone, Debug)]
pub struct NormalEquations {
    xtx: DMatrix<f64>,
    xty: Vec<f64>,
}

impl NormalEquations {
    pub fn new(x: &DenseMatrix, y: &DenseVector) -> Result<Self> {
        check_problem(x, y)?;
        let p = x.cols();
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v = dot(x.col(a), x.col(b));
                xtx[(a, b)] = v;
                xtx[(b, a)] = v;
            }
        }
        let xty = (0..p).map(|j| dot(x.col(j), y.as_slice())).collect();
        Ok(Self { xtx, xty })
    }

    pub fn features(&self) -> usize {
        self.xty.len()
    }

    fn gram_of(&self, order: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(order.len(), order.len(), |a, b| {
            self.xtx[(order[a], order[b])]
        })
    }
}

/// Factorization of the normal equations for one support.
///
/// The factor's column order is the insertion order, which need not be
/// sorted. `factor` is `None` when the support is rank-deficient and the
/// coefficients are the minimum-norm solution.
#[derive(Clone, Debug)]
pub struct FactorState {
    order: Vec<usize>,
    factor: Option<DMatrix<f64>>,
    coef: Vec<f64>,
    universe: usize,
}

impl FactorState {
    /// Fresh factorization for `support`.
    pub fn new(ne: &NormalEquations, support: &SupportSet, cfg: &SolverConfig) -> Result<Self> {
        if support.universe() != ne.features() {
            return Err(Error::DimensionMismatch(format!(
                "support over {} features for {} columns",
                support.universe(),
                ne.features()
            )));
        }
        Ok(Self::factor_order(ne, support.indices().to_vec(), cfg))
    }

    fn factor_order(ne: &NormalEquations, order: Vec<usize>, cfg: &SolverConfig) -> Self {
        let universe = ne.features();
        if order.is_empty() {
            return Self {
                order,
                factor: Some(DMatrix::zeros(0, 0)),
                coef: Vec::new(),
                universe,
            };
        }
        let gram = ne.gram_of(&order);
        let rhs: Vec<f64> = order.iter().map(|&j| ne.xty[j]).collect();
        let (coef, factor) = solve_normal_equations(&gram, &rhs, cfg.rank_tol);
        Self {
            order,
            factor,
            coef,
            universe,
        }
    }

    pub fn support(&self) -> SupportSet {
        let mut indices = self.order.clone();
        indices.sort_unstable();
        SupportSet {
            indices,
            universe: self.universe,
        }
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.factor.is_none()
    }

    /// Coefficients over all features, zero outside the support.
    pub fn solve(&self) -> DenseVector {
        let mut beta = vec![0.0; self.universe];
        for (k, &j) in self.order.iter().enumerate() {
            beta[j] = self.coef[k];
        }
        DenseVector { data: beta }
    }

    /// State for the support with `index` toggled: added when absent,
    /// removed when present.
    pub fn gram_update(
        &self,
        ne: &NormalEquations,
        index: usize,
        cfg: &SolverConfig,
    ) -> Result<FactorState> {
        ensure(index < self.universe, || {
            format!("index {index} outside 0..{}", self.universe)
        })?;
        if ne.features() != self.universe {
            return Err(Error::DimensionMismatch(
                "normal equations do not match factor state".into(),
            ));
        }
        let position = self.order.iter().position(|&j| j == index);
        let Some(l) = &self.factor else {
            let mut order = self.order.clone();
            match position {
                Some(k) => {
                    order.remove(k);
                }
                None => order.push(index),
            }
            return Ok(Self::factor_order(ne, order, cfg));
        };
        let updated = match position {
            None => self.append(ne, l, index, cfg),
            Some(k) => Some(self.delete(ne, l, k)),
        };
        Ok(updated.unwrap_or_else(|| {
            let mut order = self.order.clone();
            order.push(index);
            Self::factor_order(ne, order, cfg)
        }))
    }

    /// Appends a row to the factor; `None` when the new pivot is unsafe.
    fn append(
        &self,
        ne: &NormalEquations,
        l: &DMatrix<f64>,
        index: usize,
        cfg: &SolverConfig,
    ) -> Option<FactorState> {
        let m = self.order.len();
        let cross: Vec<f64> = self.order.iter().map(|&j| ne.xtx[(j, index)]).collect();
        let w = forward_substitute(l, &cross);
        let gii = ne.xtx[(index, index)];
        let pivot = gii - w.iter().map(|v| v * v).sum::<f64>();
        let scale = self
            .order
            .iter()
            .map(|&j| ne.xtx[(j, j)])
            .fold(gii, f64::max);
        if pivot.is_nan() || pivot <= cfg.rank_tol * scale {
            return None;
        }
        let mut grown = DMatrix::<f64>::zeros(m + 1, m + 1);
        grown.view_mut((0, 0), (m, m)).copy_from(l);
        for (k, wk) in w.iter().enumerate() {
            grown[(m, k)] = *wk;
        }
        grown[(m, m)] = pivot.sqrt();
        let mut order = self.order.clone();
        order.push(index);
        Some(self.with_factor(ne, order, grown))
    }

    /// Deletes row/column `k` and restores the trailing block by a rank-one
    /// update with the removed sub-column.
    fn delete(&self, ne: &NormalEquations, l: &DMatrix<f64>, k: usize) -> FactorState {
        let m = self.order.len();
        let mut shrunk = DMatrix::<f64>::zeros(m - 1, m - 1);
        for i in 0..m - 1 {
            let si = if i < k { i } else { i + 1 };
            for j in 0..=i {
                let sj = if j < k { j } else { j + 1 };
                shrunk[(i, j)] = l[(si, sj)];
            }
        }
        let mut w: Vec<f64> = (k + 1..m).map(|i| l[(i, k)]).collect();
        cholesky_rank_one_update(&mut shrunk, k, &mut w);
        let mut order = self.order.clone();
        order.remove(k);
        self.with_factor(ne, order, shrunk)
    }

    fn with_factor(&self, ne: &NormalEquations, order: Vec<usize>, l: DMatrix<f64>) -> FactorState {
        let rhs: Vec<f64> = order.iter().map(|&j| ne.xty[j]).collect();
        let coef = cholesky_solve(&l, &rhs);
        FactorState {
            order,
            factor: Some(l),
            coef,
            universe: self.universe,
        }
    }
}

/// Free-function form of [`FactorState::gram_update`].
pub fn gram_update(
    state: &FactorState,
    ne: &NormalEquations,
    index: usize,
    cfg: &SolverConfig,
) -> Result<FactorState> {
    state.gram_update(ne, index, cfg)
}

/// Updates the lower factor block starting at `start` so that
/// `L L^T` gains `w w^T` on that block.
fn cholesky_rank_one_update(l: &mut DMatrix<f64>, start: usize, w: &mut [f64]) {
    let m = l.nrows();
    for (jj, j) in (start..m).enumerate() {
        let ljj = l[(j, j)];
        let r = ljj.hypot(w[jj]);
        let c = r / ljj;
        let s = w[jj] / ljj;
        l[(j, j)] = r;
        for (ii, i) in (j + 1..m).enumerate().map(|(o, i)| (jj + 1 + o, i)) {
            let lij = (l[(i, j)] + s * w[ii]) / c;
            w[ii] = c * w[ii] - s * lij;
            l[(i, j)] = lij;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vecf(v: &[f64]) -> DenseVector {
        DenseVector::new(v.to_vec()).unwrap()
    }

    fn lcg_matrix(n: usize, p: usize, mut state: u64) -> DenseMatrix {
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n * p {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            data.push((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
        }
        DenseMatrix::new(n, p, data).unwrap()
    }

    #[test]
    fn identity_single_column() {
        let x = DenseMatrix::identity(2).unwrap();
        let s = SupportSet::new(vec![1], 2).unwrap();
        let b = restricted_ols(&x, &vecf(&[2.0, 3.0]), &s, &SolverConfig::default()).unwrap();
        assert_eq!(b.as_slice(), &[0.0, 3.0]);
    }

    #[test]
    fn exact_square_solve() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = restricted_ols(&x, &vecf(&[1.0, 2.0]), &SupportSet::full(2), &SolverConfig::default())
            .unwrap();
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_support_is_zero() {
        let x = lcg_matrix(6, 3, 7);
        let y = vecf(&[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let b = restricted_ols(&x, &y, &SupportSet::empty(3), &SolverConfig::default()).unwrap();
        assert_eq!(b.as_slice(), &[0.0; 3]);
        assert_abs_diff_eq!(
            residual_loss(&x, &y, &b).unwrap(),
            0.5 * y.norm_squared(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn residual_loss_examples() {
        let x = DenseMatrix::identity(2).unwrap();
        assert_eq!(residual_loss(&x, &vecf(&[3.0, 4.0]), &DenseVector::zeros(2)).unwrap(), 12.5);
        assert_eq!(residual_loss(&x, &vecf(&[1.0, 2.0]), &vecf(&[1.0, 0.0])).unwrap(), 2.0);
        assert_eq!(residual_loss(&x, &vecf(&[1.0, 2.0]), &vecf(&[1.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_errors() {
        let x = DenseMatrix::identity(2).unwrap();
        assert!(matches!(
            residual_loss(&x, &vecf(&[1.0]), &DenseVector::zeros(2)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            restricted_ols(&x, &vecf(&[1.0, 2.0]), &SupportSet::full(3), &SolverConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(DenseVector::new(vec![f64::NAN]), Err(Error::NonFinite(_))));
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn support_set_basics() {
        let s = SupportSet::new(vec![3, 1, 3], 5).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert!(SupportSet::new(vec![5], 5).is_err());
        assert_eq!(s.toggled(2).indices(), &[1, 2, 3]);
        assert_eq!(s.toggled(3).indices(), &[1]);
        let t = SupportSet::new(vec![0, 1], 5).unwrap();
        assert_eq!(s.symmetric_difference_len(&t), 2);
        assert_eq!(SupportSet::of(&vecf(&[0.0, -1.0, 0.0])).indices(), &[1]);
    }

    #[test]
    fn add_to_empty_is_scalar_regression() {
        let x = lcg_matrix(15, 4, 11);
        let y = DenseVector::new((0..15).map(|i| (i as f64).sin()).collect()).unwrap();
        let ne = NormalEquations::new(&x, &y).unwrap();
        let cfg = SolverConfig::default();
        let s0 = FactorState::new(&ne, &SupportSet::empty(4), &cfg).unwrap();
        let s1 = s0.gram_update(&ne, 2, &cfg).unwrap();
        let expected = dot(x.col(2), y.as_slice()) / dot(x.col(2), x.col(2));
        let b = s1.solve();
        assert_abs_diff_eq!(b[2], expected, epsilon = 1e-12);
        assert_eq!(b.count_nonzero(), 1);
    }

    #[test]
    fn add_then_remove_round_trips() {
        let x = lcg_matrix(20, 8, 3);
        let y = DenseVector::new((0..20).map(|i| (0.3 * i as f64).cos()).collect()).unwrap();
        let ne = NormalEquations::new(&x, &y).unwrap();
        let cfg = SolverConfig::default();
        let s = FactorState::new(&ne, &SupportSet::new(vec![0, 2, 5], 8).unwrap(), &cfg).unwrap();
        let back = s.gram_update(&ne, 6, &cfg).unwrap().gram_update(&ne, 6, &cfg).unwrap();
        for (a, b) in s.solve().iter().zip(back.solve().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_eq!(back.support(), s.support());
    }

    #[test]
    fn updated_solves_match_fresh_on_random_walk() {
        let x = lcg_matrix(20, 8, 99);
        let y = DenseVector::new((0..20).map(|i| ((i * i) as f64 * 0.1).sin()).collect()).unwrap();
        let ne = NormalEquations::new(&x, &y).unwrap();
        let cfg = SolverConfig::default();
        let mut state = FactorState::new(&ne, &SupportSet::empty(8), &cfg).unwrap();
        for &i in &[3, 0, 7, 5, 0, 1, 2, 3, 6, 4, 7, 0, 5] {
            state = state.gram_update(&ne, i, &cfg).unwrap();
            let fresh = restricted_ols(&x, &y, &state.support(), &cfg).unwrap();
            for (a, b) in state.solve().iter().zip(fresh.iter()) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn collinear_support_falls_back_to_min_norm() {
        let base = lcg_matrix(10, 2, 5);
        let c0 = base.col(0).to_vec();
        let c1: Vec<f64> = c0.iter().map(|v| 2.0 * v).collect();
        let x = DenseMatrix::from_columns(&[c0, c1, base.col(1).to_vec()]).unwrap();
        let y = DenseVector::new((0..10).map(|i| i as f64 - 4.5).collect()).unwrap();
        let cfg = SolverConfig::default();
        let both = restricted_ols(&x, &y, &SupportSet::new(vec![0, 1], 3).unwrap(), &cfg).unwrap();
        let single = restricted_ols(&x, &y, &SupportSet::new(vec![0], 3).unwrap(), &cfg).unwrap();
        assert_abs_diff_eq!(
            residual_loss(&x, &y, &both).unwrap(),
            residual_loss(&x, &y, &single).unwrap(),
            epsilon = 1e-10
        );
        // Minimum norm splits the fit along (1, 2).
        assert_abs_diff_eq!(both[1], 2.0 * both[0], epsilon = 1e-10);

        let ne = NormalEquations::new(&x, &y).unwrap();
        let s = FactorState::new(&ne, &SupportSet::new(vec![0], 3).unwrap(), &cfg).unwrap();
        let s = s.gram_update(&ne, 1, &cfg).unwrap();
        assert!(s.is_rank_deficient());
        for (a, b) in s.solve().iter().zip(both.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let s = s.gram_update(&ne, 0, &cfg).unwrap();
        assert!(!s.is_rank_deficient());
        assert_eq!(s.support().indices(), &[1]);
    }
}
