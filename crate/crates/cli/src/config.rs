//! Command-line flags and the optional TOML file that backs them.
//!
//! Every option may also be given in the file under the same name (with
//! underscores); a flag on the command line always wins.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lass0::data::{CorrelationModel, TargetColumn};
use lass0::eval::{GridSpec, SelectionRule};
use lass0::{LambdaGrid, Lass0Config, LassoConfig, SolverConfig};
use serde::Deserialize;

use crate::Failure;

#[derive(Parser, Debug)]
#[command(name = "lass0", version, about = "Sparse regression with an L0 penalty, started from the Lasso")]
pub struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit on a CSV file at a fixed penalty or one chosen by cross-validation.
    Fit(FitArgs),
    /// Write one synthetic instance.
    Synth(SynthArgs),
    /// Support-recovery experiment over a sweep of sparsity levels.
    Recover(RecoverArgs),
    /// Nested cross-validated comparison of L1 and Lass0 on a CSV file.
    Bench(BenchArgs),
    /// Seeded property suites against the exact solvers.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    Compound,
    Ar1,
}

impl From<Correlation> for CorrelationModel {
    fn from(c: Correlation) -> Self {
        match c {
            Correlation::Compound => CorrelationModel::Compound,
            Correlation::Ar1 => CorrelationModel::Ar1,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Seed for every random choice the command makes.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
pub struct InputArgs {
    /// Numeric CSV file.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Response column: a header name or a zero-based index. Defaults to the last column.
    #[arg(long)]
    pub target: Option<String>,
    /// The first row is data, not a header.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Args, Debug, Default)]
pub struct SolverArgs {
    /// Solve the raw problem: no centering, scaling or intercept.
    #[arg(long)]
    pub no_standardize: bool,
    /// Coordinate-descent tolerance on coefficient change.
    #[arg(long)]
    pub lasso_tol: Option<f64>,
    /// Coordinate-descent sweep limit.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Smallest objective decrease accepted as a step.
    #[arg(long)]
    pub min_improvement: Option<f64>,
    /// Step limit for the stepwise search (default 10 p).
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Relative pivot threshold below which a support is treated as rank deficient.
    #[arg(long)]
    pub rank_tol: Option<f64>,
    /// Separate penalty for the Lasso initialization.
    #[arg(long)]
    pub init_lambda: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct CvArgs {
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Pick the largest penalty within one standard error of the best.
    #[arg(long)]
    pub one_se: bool,
    /// `auto`, `auto:COUNT`, `auto:COUNT:MIN_RATIO`, or a comma separated list.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Fixed penalty; without it the penalty is chosen on `--grid` by cross-validation.
    #[arg(long, conflicts_with = "grid")]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Default)]
pub struct SynthSpecArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, value_enum)]
    pub correlation: Option<Correlation>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub spec: SynthSpecArgs,
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub spec: SynthSpecArgs,
    /// Comma separated sparsity levels (default 1 to p/2).
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Option<Vec<usize>>,
    /// Instances per sparsity level.
    #[arg(long)]
    pub instances: Option<usize>,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// Instances per suite (defaults 50 orthogonal, 100 collinear, 200 dominance).
    #[arg(long)]
    pub instances: Option<usize>,
    /// Column count of the exhaustive-dominance suite, at most 20.
    #[arg(long)]
    pub p: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Contents of `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub target: Option<String>,
    pub no_header: Option<bool>,
    pub lambda: Option<f64>,
    pub grid: Option<String>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub inner_folds: Option<usize>,
    pub one_se: Option<bool>,
    pub format: Option<Format>,
    pub standardize: Option<bool>,
    pub lasso_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub min_improvement: Option<f64>,
    pub max_steps: Option<usize>,
    pub rank_tol: Option<f64>,
    pub init_lambda: Option<f64>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub sparsity: Option<Vec<usize>>,
    pub instances: Option<usize>,
    pub correlation: Option<Correlation>,
    pub rho: Option<f64>,
    pub sigma: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    }
}

pub fn format(out: &OutputArgs, file: &FileConfig, default: Format) -> Format {
    out.format.or(file.format).unwrap_or(default)
}

pub fn seed(out: &OutputArgs, file: &FileConfig) -> u64 {
    out.seed.or(file.seed).unwrap_or(0)
}

pub fn input_path(args: &InputArgs, file: &FileConfig) -> Result<PathBuf, Failure> {
    args.input
        .clone()
        .or_else(|| file.input.clone())
        .ok_or_else(|| Failure::Input("missing --input".into()))
}

pub fn target(args: &InputArgs, file: &FileConfig) -> TargetColumn {
    match args.target.as_ref().or(file.target.as_ref()) {
        None => TargetColumn::Last,
        Some(t) => t
            .parse::<usize>()
            .map(TargetColumn::Index)
            .unwrap_or_else(|_| TargetColumn::Name(t.clone())),
    }
}

pub fn has_header(args: &InputArgs, file: &FileConfig) -> bool {
    !(args.no_header || file.no_header.unwrap_or(false))
}

pub fn lasso_config(s: &SolverArgs, file: &FileConfig) -> LassoConfig {
    let d = LassoConfig::default();
    LassoConfig {
        lambda: d.lambda,
        max_iters: s.max_iters.or(file.max_iters).unwrap_or(d.max_iters),
        coef_tol: s.lasso_tol.or(file.lasso_tol).unwrap_or(d.coef_tol),
        standardize: !s.no_standardize && file.standardize.unwrap_or(d.standardize),
    }
}

pub fn lass0_config(s: &SolverArgs, file: &FileConfig) -> Lass0Config {
    let d = Lass0Config::default();
    Lass0Config {
        init_lambda: s.init_lambda.or(file.init_lambda),
        min_improvement: s.min_improvement.or(file.min_improvement).unwrap_or(d.min_improvement),
        max_steps: s.max_steps.or(file.max_steps).or(d.max_steps),
        solver: SolverConfig {
            rank_tol: s.rank_tol.or(file.rank_tol).unwrap_or(d.solver.rank_tol),
            ..d.solver
        },
        ..d
    }
}

pub fn folds(cv: &CvArgs, file: &FileConfig) -> usize {
    cv.folds.or(file.folds).unwrap_or(10)
}

pub fn inner_folds(cv: &CvArgs, file: &FileConfig) -> usize {
    cv.inner_folds.or(file.inner_folds).unwrap_or(5)
}

pub fn selection(cv: &CvArgs, file: &FileConfig) -> SelectionRule {
    if cv.one_se || file.one_se.unwrap_or(false) {
        SelectionRule::OneStandardError
    } else {
        SelectionRule::MinMse
    }
}

pub fn grid(cv: &CvArgs, file: &FileConfig) -> Result<GridSpec, Failure> {
    match cv.grid.as_ref().or(file.grid.as_ref()) {
        None => Ok(GridSpec::default()),
        Some(g) => parse_grid(g),
    }
}

/// Penalty setting for `fit`: a flag on either side overrides both file keys.
pub fn fit_penalty(args: &FitArgs, file: &FileConfig) -> Result<Option<f64>, Failure> {
    if args.lambda.is_some() || args.cv.grid.is_some() {
        return Ok(args.lambda);
    }
    if file.lambda.is_some() && file.grid.is_some() {
        return Err(Failure::Input("config sets both lambda and grid".into()));
    }
    Ok(file.lambda)
}

pub fn parse_grid(text: &str) -> Result<GridSpec, Failure> {
    let bad = |why: String| Failure::Input(format!("invalid --grid {text:?}: {why}"));
    let text = text.trim();
    if let Some(rest) = text.strip_prefix("auto") {
        let GridSpec::Auto {
            mut count,
            mut min_ratio,
        } = GridSpec::default()
        else {
            unreachable!()
        };
        let mut parts = rest.split(':').skip(1);
        if let Some(c) = parts.next() {
            count = c.parse().map_err(|e| bad(format!("{e}")))?;
        }
        if let Some(r) = parts.next() {
            min_ratio = r.parse().map_err(|e| bad(format!("{e}")))?;
        }
        if parts.next().is_some() || (!rest.is_empty() && !rest.starts_with(':')) {
            return Err(bad("expected auto[:COUNT[:MIN_RATIO]]".into()));
        }
        if count == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
            return Err(bad("count must be positive and min ratio in (0, 1)".into()));
        }
        return Ok(GridSpec::Auto { count, min_ratio });
    }
    let mut values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    // Paths run from the largest penalty down.
    values.sort_by(|a, b| b.total_cmp(a));
    values.dedup();
    LambdaGrid::new(values)
        .map(GridSpec::Explicit)
        .map_err(|e| bad(e.to_string()))
}
