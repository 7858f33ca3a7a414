//! Cross-validated comparison of the Lasso against the stepwise L0 search.
//!
//! For every outer fold the penalty is chosen by an inner cross-validation on
//! the training rows only, both methods are fitted on the training rows at
//! that penalty, and metrics are taken on the held-out rows (prediction
//! error) or against the planted support (Hamming distance).

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, rng, SyntheticSpec};
use crate::error::{ensure, Error, Result};
use crate::lass0::{lass0_pipeline_detailed, Lass0Config};
use crate::lasso::{fit_lasso, lambda_max, lasso_path, LambdaGrid, LassoConfig};
use crate::linalg::{DenseMatrix, DenseVector, SupportSet};

pub const SCHEMA_VERSION: u32 = 1;

/// Assignment of rows to `k` folds whose sizes differ by at most one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        Self::from_stream(n, k, seed, rng::stream_id(rng::OUTER_FOLDS, 0, 0))
    }

    /// Plan drawn from an explicit stream of `seed`.
    pub fn from_stream(n: usize, k: usize, seed: u64, stream: u64) -> Result<Self> {
        ensure(k >= 2, || format!("need at least 2 folds, got {k}"))?;
        ensure(k <= n, || format!("{k} folds for {n} rows"))?;
        let mut r = rng::with_stream_id(seed, stream);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let mut assignment = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            assignment[row] = pos % k;
        }
        Ok(Self { n, k, seed, assignment })
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Size of the symmetric difference of two supports.
pub fn hamming_support(a: &SupportSet, b: &SupportSet) -> Result<usize> {
    if a.universe() != b.universe() {
        return Err(Error::DimensionMismatch(format!(
            "supports over {} and {} features",
            a.universe(),
            b.universe()
        )));
    }
    Ok(a.symmetric_difference_len(b))
}

/// `100 * RMSE / population std(y_true)`, in percent.
pub fn nrmse(y_true: &DenseVector, y_pred: &DenseVector) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    ensure(y_true.len() >= 2, || "nrmse needs at least 2 values".into())?;
    let n = y_true.len() as f64;
    let mean = y_true.mean();
    let var = y_true.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::UndefinedNormalization("targets are constant".into()));
    }
    let mse = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    Ok(100.0 * (mse / var).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    L1,
    Lass0,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::L1 => "L1",
            Method::Lass0 => "Lass0",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Penalty with the lowest mean CV error.
    #[default]
    MinMse,
    /// Largest penalty within one standard error of the minimum.
    OneStandardError,
}

/// How the penalty grid is built for each training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// `count` log-spaced values from the training set's `lambda_max` down to
    /// `min_ratio * lambda_max`.
    Auto { count: usize, min_ratio: f64 },
    Explicit(LambdaGrid),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            count: 100,
            min_ratio: 1e-3,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, x: &DenseMatrix, y: &DenseVector, standardize: bool) -> Result<LambdaGrid> {
        match self {
            GridSpec::Explicit(g) => Ok(g.clone()),
            GridSpec::Auto { count, min_ratio } => {
                let max = lambda_max(x, y, standardize)?;
                ensure(max > 0.0, || "no penalty grid: lambda_max is zero".into())?;
                LambdaGrid::log_spaced(max, *min_ratio, *count)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Lasso settings; `lambda` is replaced by the selected penalty.
    pub lasso: LassoConfig,
    /// Stepwise-search settings; `lambda` is replaced by the selected penalty.
    pub lass0: Lass0Config,
    pub inner_folds: usize,
    pub selection: SelectionRule,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            lasso: LassoConfig::default(),
            lass0: Lass0Config::default(),
            inner_folds: 5,
            selection: SelectionRule::MinMse,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSettings {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldSettings {
    fn default() -> Self {
        Self { k: 10, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub index: usize,
    pub cv_mse: Vec<f64>,
    pub cv_se: Vec<f64>,
}

/// Chooses a penalty from `grid` by cross-validating the Lasso path.
pub fn select_lambda(
    x: &DenseMatrix,
    y: &DenseVector,
    grid: &LambdaGrid,
    plan: &FoldPlan,
    lasso: &LassoConfig,
    rule: SelectionRule,
) -> Result<LambdaSelection> {
    if plan.n != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "fold plan over {} rows for {} rows",
            plan.n,
            x.rows()
        )));
    }
    let m = grid.values().len();
    let mut per_fold = vec![Vec::with_capacity(plan.k); m];
    for fold in 0..plan.k {
        let (train, test) = (plan.train_indices(fold), plan.test_indices(fold));
        let (xt, yt) = (x.select_rows(&train)?, y.select(&train));
        let (xv, yv) = (x.select_rows(&test)?, y.select(&test));
        for (g, fit) in lasso_path(&xt, &yt, grid, lasso)?.iter().enumerate() {
            let pred = fit.solution.predict(&xv)?;
            let mse = yv
                .iter()
                .zip(pred.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / yv.len() as f64;
            per_fold[g].push(mse);
        }
    }
    let cv_mse: Vec<f64> = per_fold.iter().map(|v| mean(v)).collect();
    let cv_se: Vec<f64> = per_fold
        .iter()
        .map(|v| sample_std(v) / (v.len() as f64).sqrt())
        .collect();
    let best = (0..m).fold(0, |b, g| if cv_mse[g] < cv_mse[b] { g } else { b });
    let index = match rule {
        SelectionRule::MinMse => best,
        SelectionRule::OneStandardError => {
            let bound = cv_mse[best] + cv_se[best];
            (0..=best).find(|&g| cv_mse[g] <= bound).unwrap_or(best)
        }
    };
    Ok(LambdaSelection {
        lambda: grid.values()[index],
        index,
        cv_mse,
        cv_se,
    })
}

/// One method's result on one outer fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    /// Index of the synthetic spec, 0 for a single dataset.
    pub group: usize,
    pub sparsity: Option<usize>,
    pub instance_seed: Option<u64>,
    pub fold: usize,
    pub method: Method,
    pub lambda_selected: f64,
    /// Held-out NRMSE in percent.
    pub nrmse: f64,
    pub support_size: usize,
    pub hamming: Option<usize>,
    /// L0 objective at the selected penalty on the training rows.
    pub l0_objective: f64,
    /// Stepwise search only: L0 objective of least squares on the Lasso
    /// support, the point the search starts from.
    pub polished_init_objective: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single record.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            std: sample_std(values),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sparsity: Option<usize>,
    pub method: Method,
    pub count: usize,
    pub hamming: Option<Summary>,
    pub nrmse: Summary,
    pub support_size: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub folds: usize,
    pub fold_seed: u64,
    pub grid: GridSpec,
    pub comparison: ComparisonConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub experiment: String,
    pub rng: String,
    pub settings: ReportSettings,
    pub specs: Vec<SyntheticSpec>,
    pub records: Vec<FoldRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Mean and standard deviation per (sparsity level, method), in ascending
/// order of both.
pub fn aggregate(records: &[FoldRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Option<usize>, Method)> =
        records.iter().map(|r| (r.sparsity, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(sparsity, method)| {
            let rows: Vec<&FoldRecord> = records
                .iter()
                .filter(|r| r.sparsity == sparsity && r.method == method)
                .collect();
            let pick = |f: &dyn Fn(&FoldRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
            let hamming = if rows.iter().all(|r| r.hamming.is_some()) {
                Some(Summary::of(&pick(&|r| r.hamming.unwrap_or(0) as f64)))
            } else {
                None
            };
            AggregateRow {
                sparsity,
                method,
                count: rows.len(),
                hamming,
                nrmse: Summary::of(&pick(&|r| r.nrmse)),
                support_size: Summary::of(&pick(&|r| r.support_size as f64)),
            }
        })
        .collect()
}

struct FoldJob<'a> {
    group: usize,
    fold: usize,
    x: &'a DenseMatrix,
    y: &'a DenseVector,
    plan: &'a FoldPlan,
    truth: Option<&'a SupportSet>,
    sparsity: Option<usize>,
    instance_seed: Option<u64>,
    inner_seed: u64,
}

fn evaluate_fold(job: &FoldJob<'_>, grid: &GridSpec, cfg: &ComparisonConfig) -> Result<[FoldRecord; 2]> {
    let (train, test) = (job.plan.train_indices(job.fold), job.plan.test_indices(job.fold));
    let (xt, yt) = (job.x.select_rows(&train)?, job.y.select(&train));
    let (xv, yv) = (job.x.select_rows(&test)?, job.y.select(&test));

    let lambdas = grid.resolve(&xt, &yt, cfg.lasso.standardize)?;
    let inner = FoldPlan::from_stream(
        train.len(),
        cfg.inner_folds,
        job.inner_seed,
        rng::stream_id(rng::INNER_FOLDS, job.group as u64, job.fold as u64),
    )?;
    let sel = select_lambda(&xt, &yt, &lambdas, &inner, &cfg.lasso, cfg.selection)?;
    let lambda = sel.lambda;

    let outcome = lass0_pipeline_detailed(&xt, &yt, lambda, &cfg.lass0, &cfg.lasso)?;
    let l1 = match cfg.lass0.init_lambda {
        None => outcome.lasso.solution.clone(),
        Some(_) => fit_lasso(&xt, &yt, &LassoConfig { lambda, ..cfg.lasso.clone() })?.solution,
    };
    let lass0 = &outcome.solution;

    let hamming = |s: &SupportSet| job.truth.map(|t| hamming_support(s, t)).transpose();
    let base = FoldRecord {
        group: job.group,
        sparsity: job.sparsity,
        instance_seed: job.instance_seed,
        fold: job.fold,
        method: Method::L1,
        lambda_selected: lambda,
        nrmse: nrmse(&yv, &l1.predict(&xv)?)?,
        support_size: l1.support.len(),
        hamming: hamming(&l1.support)?,
        l0_objective: l1.objective,
        polished_init_objective: None,
        converged: l1.converged,
    };
    let stepwise = FoldRecord {
        method: Method::Lass0,
        nrmse: nrmse(&yv, &lass0.predict(&xv)?)?,
        support_size: lass0.support.len(),
        hamming: hamming(&lass0.support)?,
        l0_objective: lass0.objective,
        polished_init_objective: Some(outcome.polished_init_objective),
        converged: lass0.converged && outcome.lasso.solution.converged,
        ..base.clone()
    };
    Ok([base, stepwise])
}

fn run_jobs(jobs: &[FoldJob<'_>], grid: &GridSpec, cfg: &ComparisonConfig) -> Result<Vec<FoldRecord>> {
    let results: Vec<Result<[FoldRecord; 2]>> =
        jobs.par_iter().map(|j| evaluate_fold(j, grid, cfg)).collect();
    let mut records = Vec::with_capacity(2 * jobs.len());
    for r in results {
        records.extend(r?);
    }
    Ok(records)
}

/// Hamming distance to the planted support for both methods, over every
/// spec and outer fold, aggregated per sparsity level.
pub fn run_support_recovery(
    specs: &[SyntheticSpec],
    grid: &GridSpec,
    folds: &FoldSettings,
    cfg: &ComparisonConfig,
) -> Result<ComparisonReport> {
    ensure(!specs.is_empty(), || "no synthetic specs".into())?;
    let instances = specs
        .iter()
        .map(generate_synthetic)
        .collect::<Result<Vec<_>>>()?;
    let plans = specs
        .iter()
        .enumerate()
        .map(|(g, s)| {
            FoldPlan::from_stream(s.n, folds.k, folds.seed, rng::stream_id(rng::OUTER_FOLDS, g as u64, 0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for (g, (inst, spec)) in instances.iter().zip(specs).enumerate() {
        for fold in 0..folds.k {
            jobs.push(FoldJob {
                group: g,
                fold,
                x: &inst.x,
                y: &inst.y,
                plan: &plans[g],
                truth: Some(&inst.support_true),
                sparsity: Some(spec.sparsity),
                instance_seed: Some(spec.seed),
                inner_seed: folds.seed,
            });
        }
    }
    let records = run_jobs(&jobs, grid, cfg)?;
    Ok(ComparisonReport {
        schema_version: SCHEMA_VERSION,
        experiment: "support_recovery".into(),
        rng: rng::FAMILY.into(),
        settings: ReportSettings {
            folds: folds.k,
            fold_seed: folds.seed,
            grid: grid.clone(),
            comparison: cfg.clone(),
        },
        specs: specs.to_vec(),
        aggregates: aggregate(&records),
        records,
    })
}

/// Held-out NRMSE and support size for both methods on one dataset.
pub fn run_accuracy_comparison(
    x: &DenseMatrix,
    y: &DenseVector,
    grid: &GridSpec,
    folds: &FoldPlan,
    cfg: &ComparisonConfig,
) -> Result<ComparisonReport> {
    if folds.n != x.rows() || y.len() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows, {} responses, fold plan over {}",
            x.rows(),
            y.len(),
            folds.n
        )));
    }
    let jobs: Vec<FoldJob<'_>> = (0..folds.k)
        .map(|fold| FoldJob {
            group: 0,
            fold,
            x,
            y,
            plan: folds,
            truth: None,
            sparsity: None,
            instance_seed: None,
            inner_seed: folds.seed,
        })
        .collect();
    let records = run_jobs(&jobs, grid, cfg)?;
    Ok(ComparisonReport {
        schema_version: SCHEMA_VERSION,
        experiment: "accuracy_comparison".into(),
        rng: rng::FAMILY.into(),
        settings: ReportSettings {
            folds: folds.k,
            fold_seed: folds.seed,
            grid: grid.clone(),
            comparison: cfg.clone(),
        },
        specs: Vec::new(),
        aggregates: aggregate(&records),
        records,
    })
}

impl ComparisonReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn aggregate_for(&self, sparsity: Option<usize>, method: Method) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.sparsity == sparsity && a.method == method)
    }

    /// Aggregates as CSV, one row per (sparsity, method); absent values are
    /// empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sparsity,method,count,hamming_mean,hamming_std,nrmse_mean,nrmse_std,support_mean,support_std\n",
        );
        for a in &self.aggregates {
            let sparsity = a.sparsity.map(|s| s.to_string()).unwrap_or_default();
            let (hm, hs) = a
                .hamming
                .map(|h| (h.mean.to_string(), h.std.to_string()))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{sparsity},{},{},{hm},{hs},{},{},{},{}",
                a.method, a.count, a.nrmse.mean, a.nrmse.std, a.support_size.mean, a.support_size.std
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment  {} (schema {})", self.experiment, self.schema_version);
        let _ = writeln!(out, "rng         {}", self.rng);
        let _ = writeln!(
            out,
            "folds       {} (seed {}), inner folds {}",
            self.settings.folds, self.settings.fold_seed, self.settings.comparison.inner_folds
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>8}  {:<6} {:>5}  {:>16}  {:>16}  {:>16}",
            "sparsity", "method", "n", "hamming", "nrmse %", "|supp|"
        );
        for a in &self.aggregates {
            let ms = |s: Summary| format!("{:.3} ± {:.3}", s.mean, s.std);
            let _ = writeln!(
                out,
                "{:>8}  {:<6} {:>5}  {:>16}  {:>16}  {:>16}",
                a.sparsity.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
                a.method.to_string(),
                a.count,
                a.hamming.map(ms).unwrap_or_else(|| "-".into()),
                ms(a.nrmse),
                ms(a.support_size),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vecf(v: &[f64]) -> DenseVector {
        DenseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hamming_examples() {
        let a = SupportSet::of(&vecf(&[1.0, 0.0, 2.0]));
        let b = SupportSet::of(&vecf(&[0.0, 0.0, 2.0]));
        assert_eq!(hamming_support(&a, &b).unwrap(), 1);
        assert_eq!(hamming_support(&a, &a).unwrap(), 0);
        let c = SupportSet::new(vec![0, 1], 4).unwrap();
        let d = SupportSet::new(vec![2, 3], 4).unwrap();
        assert_eq!(hamming_support(&c, &d).unwrap(), 4);
        assert!(hamming_support(&a, &c).is_err());
    }

    #[test]
    fn nrmse_examples() {
        let y = vecf(&[1.0, 4.0, -2.0, 3.0]);
        let m = y.mean();
        assert_abs_diff_eq!(nrmse(&y, &vecf(&[m; 4])).unwrap(), 100.0, epsilon = 1e-12);
        assert_eq!(nrmse(&y, &y).unwrap(), 0.0);
        assert_abs_diff_eq!(nrmse(&vecf(&[0.0, 2.0]), &vecf(&[1.0, 1.0])).unwrap(), 100.0, epsilon = 1e-12);
        assert!(matches!(
            nrmse(&vecf(&[1.0, 1.0]), &vecf(&[1.0, 2.0])),
            Err(Error::UndefinedNormalization(_))
        ));
        assert!(nrmse(&vecf(&[1.0]), &vecf(&[1.0])).is_err());
        assert!(nrmse(&vecf(&[1.0, 2.0]), &vecf(&[1.0])).is_err());
    }

    #[test]
    fn fold_plan_partitions() {
        let plan = FoldPlan::new(23, 10, 5).unwrap();
        let sizes = plan.fold_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(plan, FoldPlan::new(23, 10, 5).unwrap());
        assert_ne!(plan, FoldPlan::new(23, 10, 6).unwrap());
        let mut all: Vec<usize> = (0..10).flat_map(|f| plan.test_indices(f)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(FoldPlan::new(3, 4, 0).is_err());
        assert!(FoldPlan::new(3, 1, 0).is_err());
    }

    #[test]
    fn aggregates_match_records() {
        let rec = |method, sparsity, h: usize, e: f64, s: usize| FoldRecord {
            group: 0,
            sparsity,
            instance_seed: None,
            fold: 0,
            method,
            lambda_selected: 1.0,
            nrmse: e,
            support_size: s,
            hamming: Some(h),
            l0_objective: 0.0,
            polished_init_objective: None,
            converged: true,
        };
        let records = vec![
            rec(Method::L1, Some(2), 1, 50.0, 3),
            rec(Method::Lass0, Some(2), 0, 52.0, 2),
            rec(Method::L1, Some(2), 3, 60.0, 5),
            rec(Method::Lass0, Some(2), 1, 58.0, 2),
            rec(Method::L1, Some(4), 2, 70.0, 6),
        ];
        let agg = aggregate(&records);
        assert_eq!(agg.len(), 3);
        let l1 = &agg[0];
        assert_eq!((l1.sparsity, l1.method, l1.count), (Some(2), Method::L1, 2));
        let h = l1.hamming.unwrap();
        assert_abs_diff_eq!(h.mean, 2.0);
        assert_abs_diff_eq!(h.std, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(l1.nrmse.mean, 55.0);
        assert_eq!(agg[2].support_size.std, 0.0);
    }
}
