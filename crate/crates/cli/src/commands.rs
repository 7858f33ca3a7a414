use std::fmt::Write as _;
use std::path::Path;

use lass0::data::{generate_synthetic, load_csv, CsvDataset, SyntheticSpec};
use lass0::eval::{
    run_accuracy_comparison, run_support_recovery, select_lambda, ComparisonConfig, ComparisonReport,
    FoldPlan, FoldSettings, SCHEMA_VERSION,
};
use lass0::oracle::suites::{collinear_suite, dominance_suite, orthogonal_suite, CaseStatus, SuiteReport};
use lass0::oracle::DEFAULT_MAX_P;
use lass0::lass0_pipeline_detailed;
use serde::Serialize;

use crate::config::{self as cfg, BenchArgs, FileConfig, FitArgs, Format, OracleArgs, RecoverArgs, SynthArgs};
use crate::Failure;

/// What a command writes to stdout.
pub struct Output {
    pub body: String,
    /// Set when a property check failed; the body is still printed.
    pub property_failure: Option<String>,
}

impl Output {
    fn ok(body: String) -> Self {
        Self {
            body,
            property_failure: None,
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Internal(format!("serializing output: {e}")))
}

fn load(path: &Path, args: &cfg::InputArgs, file: &FileConfig) -> Result<CsvDataset, Failure> {
    let data = load_csv(path, cfg::has_header(args, file), &cfg::target(args, file))?;
    eprintln!(
        "loaded {}: {} rows, {} features, target {}",
        path.display(),
        data.x.rows(),
        data.x.cols(),
        data.target_name
    );
    Ok(data)
}

#[derive(Serialize)]
struct Coefficient {
    index: usize,
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct Selection {
    rule: lass0::eval::SelectionRule,
    folds: usize,
    seed: u64,
    grid: Vec<f64>,
    cv_mse: Vec<f64>,
    index: usize,
}

#[derive(Serialize)]
struct Convergence {
    lasso: bool,
    lass0: bool,
}

#[derive(Serialize)]
struct FitReport {
    schema_version: u32,
    command: &'static str,
    input: String,
    target: String,
    rows: usize,
    features: usize,
    lambda: f64,
    selection: Option<Selection>,
    intercept: f64,
    coefficients: Vec<Coefficient>,
    support_size: usize,
    objective: f64,
    polished_init_objective: f64,
    steps: usize,
    converged: Convergence,
}

pub fn fit(args: &FitArgs, file: &FileConfig) -> Result<Output, Failure> {
    let path = cfg::input_path(&args.input, file)?;
    let data = load(&path, &args.input, file)?;
    let lasso = cfg::lasso_config(&args.solver, file);
    let lass0 = cfg::lass0_config(&args.solver, file);

    let (lambda, selection) = match cfg::fit_penalty(args, file)? {
        Some(l) => (l, None),
        None => {
            let grid = cfg::grid(&args.cv, file)?.resolve(&data.x, &data.y, lasso.standardize)?;
            let (k, seed) = (cfg::folds(&args.cv, file), cfg::seed(&args.output, file));
            let plan = FoldPlan::new(data.x.rows(), k, seed)?;
            let rule = cfg::selection(&args.cv, file);
            let sel = select_lambda(&data.x, &data.y, &grid, &plan, &lasso, rule)?;
            eprintln!("selected lambda {} by {k}-fold cross-validation (seed {seed})", sel.lambda);
            (
                sel.lambda,
                Some(Selection {
                    rule,
                    folds: k,
                    seed,
                    grid: grid.values().to_vec(),
                    cv_mse: sel.cv_mse,
                    index: sel.index,
                }),
            )
        }
    };

    let out = lass0_pipeline_detailed(&data.x, &data.y, lambda, &lass0, &lasso)?;
    let s = &out.solution;
    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        input: path.display().to_string(),
        target: data.target_name.clone(),
        rows: data.x.rows(),
        features: data.x.cols(),
        lambda,
        selection,
        intercept: s.intercept,
        coefficients: s
            .support
            .iter()
            .map(|j| Coefficient {
                index: j,
                name: data.feature_names[j].clone(),
                value: s.beta[j],
            })
            .collect(),
        support_size: s.support.len(),
        objective: s.objective,
        polished_init_objective: out.polished_init_objective,
        steps: out.trace.steps.len(),
        converged: Convergence {
            lasso: out.lasso.solution.converged,
            lass0: s.converged,
        },
    };
    if !(report.converged.lasso && report.converged.lass0) {
        eprintln!("warning: a solver stopped at its iteration limit");
    }

    let body = match cfg::format(&args.output, file, Format::Text) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("index,name,value\n");
            let _ = writeln!(out, ",intercept,{}", report.intercept);
            for c in &report.coefficients {
                let _ = writeln!(out, "{},{},{}", c.index, c.name, c.value);
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "target      {} ({} rows, {} features)", report.target, report.rows, report.features);
            let _ = writeln!(out, "lambda      {}", report.lambda);
            let _ = writeln!(out, "support     {}", report.support_size);
            let _ = writeln!(out, "objective   {:.10} (init {:.10}, {} steps)", report.objective, report.polished_init_objective, report.steps);
            let _ = writeln!(out, "converged   lasso {}, lass0 {}", report.converged.lasso, report.converged.lass0);
            let _ = writeln!(out, "intercept   {}", report.intercept);
            for c in &report.coefficients {
                let _ = writeln!(out, "  {:>4}  {:<20} {}", c.index, c.name, c.value);
            }
            out
        }
    };
    Ok(Output::ok(body))
}

fn synth_spec(args: &cfg::SynthSpecArgs, file: &FileConfig, seed: u64) -> SyntheticSpec {
    let d = SyntheticSpec::default();
    SyntheticSpec {
        n: args.n.or(file.n).unwrap_or(d.n),
        p: args.p.or(file.p).unwrap_or(d.p),
        correlation_model: args.correlation.or(file.correlation).map(Into::into).unwrap_or(d.correlation_model),
        rho: args.rho.or(file.rho).unwrap_or(d.rho),
        noise_sigma: args.sigma.or(file.sigma).unwrap_or(d.noise_sigma),
        seed,
        ..d
    }
}

#[derive(Serialize)]
struct SynthReport<'a> {
    schema_version: u32,
    command: &'static str,
    spec: &'a SyntheticSpec,
    instance: &'a lass0::data::SyntheticInstance,
}

pub fn synth(args: &SynthArgs, file: &FileConfig) -> Result<Output, Failure> {
    let seed = cfg::seed(&args.output, file);
    let file_sparsity = match file.sparsity.as_deref() {
        None => None,
        Some([s]) => Some(*s),
        Some(_) => return Err(Failure::Input("synth takes a single sparsity level".into())),
    };
    let mut spec = synth_spec(&args.spec, file, seed);
    spec.sparsity = args.sparsity.or(file_sparsity).unwrap_or(spec.sparsity);
    let inst = generate_synthetic(&spec)?;
    eprintln!("seed {seed}");
    let body = match cfg::format(&args.output, file, Format::Csv) {
        Format::Json => to_json(&SynthReport {
            schema_version: SCHEMA_VERSION,
            command: "synth",
            spec: &spec,
            instance: &inst,
        })?,
        Format::Csv => {
            let mut out = String::new();
            let header: Vec<String> = (0..spec.p).map(|j| format!("x{j}")).chain(["y".into()]).collect();
            let _ = writeln!(out, "{}", header.join(","));
            for i in 0..spec.n {
                let row: Vec<String> = inst.x.row(i).iter().chain([&inst.y[i]]).map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "n {} p {} sparsity {} rho {} sigma {} seed {}", spec.n, spec.p, spec.sparsity, spec.rho, spec.noise_sigma, seed);
            for j in inst.support_true.iter() {
                let _ = writeln!(out, "  x{j:<4} {}", inst.beta_true[j]);
            }
            out
        }
    };
    Ok(Output::ok(body))
}

fn comparison_config(cv: &cfg::CvArgs, solver: &cfg::SolverArgs, file: &FileConfig) -> ComparisonConfig {
    ComparisonConfig {
        lasso: cfg::lasso_config(solver, file),
        lass0: cfg::lass0_config(solver, file),
        inner_folds: cfg::inner_folds(cv, file),
        selection: cfg::selection(cv, file),
    }
}

fn render_report(report: &ComparisonReport, format: Format) -> Result<String, Failure> {
    Ok(match format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    })
}

pub fn recover(args: &RecoverArgs, file: &FileConfig) -> Result<Output, Failure> {
    let seed = cfg::seed(&args.output, file);
    let base = synth_spec(&args.spec, file, seed);
    let levels = args
        .sparsity
        .clone()
        .or_else(|| file.sparsity.clone())
        .unwrap_or_else(|| (1..=(base.p / 2).max(1)).collect());
    let instances = args.instances.or(file.instances).unwrap_or(10);
    if instances == 0 {
        return Err(Failure::Input("--instances must be positive".into()));
    }
    // The same designs are reused at every sparsity level.
    let specs: Vec<SyntheticSpec> = levels
        .iter()
        .flat_map(|&s| {
            (0..instances as u64).map({
                let base = base.clone();
                move |t| SyntheticSpec {
                    sparsity: s,
                    seed: seed.wrapping_add(t),
                    ..base.clone()
                }
            })
        })
        .collect();
    let folds = FoldSettings {
        k: cfg::folds(&args.cv, file),
        seed,
    };
    eprintln!(
        "seed {seed}: {} levels x {instances} instances, {}-fold",
        levels.len(),
        folds.k
    );
    let report = run_support_recovery(
        &specs,
        &cfg::grid(&args.cv, file)?,
        &folds,
        &comparison_config(&args.cv, &args.solver, file),
    )?;
    Ok(Output::ok(render_report(&report, cfg::format(&args.output, file, Format::Json))?))
}

pub fn bench(args: &BenchArgs, file: &FileConfig) -> Result<Output, Failure> {
    let path = cfg::input_path(&args.input, file)?;
    let data = load(&path, &args.input, file)?;
    let seed = cfg::seed(&args.output, file);
    let plan = FoldPlan::new(data.x.rows(), cfg::folds(&args.cv, file), seed)?;
    eprintln!("seed {seed}");
    let report = run_accuracy_comparison(
        &data.x,
        &data.y,
        &cfg::grid(&args.cv, file)?,
        &plan,
        &comparison_config(&args.cv, &args.solver, file),
    )?;
    Ok(Output::ok(render_report(&report, cfg::format(&args.output, file, Format::Json))?))
}

#[derive(Serialize)]
struct OracleReport {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    passed: bool,
    suites: Vec<SuiteReport>,
}

pub fn oracle_check(args: &OracleArgs, file: &FileConfig) -> Result<Output, Failure> {
    let seed = cfg::seed(&args.output, file);
    let p = args.p.or(file.p).unwrap_or(12);
    if p > DEFAULT_MAX_P {
        return Err(Failure::Input(format!("--p {p} exceeds {DEFAULT_MAX_P} for exhaustive search")));
    }
    if p < 2 {
        return Err(Failure::Input("--p must be at least 2".into()));
    }
    let count = |default: usize| args.instances.or(file.instances).unwrap_or(default);
    let suites = vec![
        orthogonal_suite(count(50), 10, 10, &[0.5, 2.0, 5.0], seed)?,
        collinear_suite(count(100), 50, 8, &[1.0, -2.0, 0.5], seed)?,
        dominance_suite(count(200), 100, p, 0.7, seed)?,
    ];
    let report = OracleReport {
        schema_version: SCHEMA_VERSION,
        command: "oracle-check",
        seed,
        passed: suites.iter().all(SuiteReport::passed),
        suites,
    };

    let body = match cfg::format(&args.output, file, Format::Text) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("suite,seed,label,status\n");
            for s in &report.suites {
                for c in &s.cases {
                    let status = match c.status {
                        CaseStatus::Pass => "pass",
                        CaseStatus::Fail => "fail",
                        CaseStatus::Skip => "skip",
                    };
                    let _ = writeln!(out, "{},{},{},{status}", s.name, c.seed, c.label);
                }
            }
            out
        }
        Format::Text => {
            let mut out = format!("seed {seed}\n{:<22} {:>6} {:>6} {:>6}  result\n", "suite", "pass", "fail", "skip");
            for s in &report.suites {
                let _ = writeln!(
                    out,
                    "{:<22} {:>6} {:>6} {:>6}  {}",
                    s.name,
                    s.count(CaseStatus::Pass),
                    s.count(CaseStatus::Fail),
                    s.count(CaseStatus::Skip),
                    if s.passed() { "PASS" } else { "FAIL" }
                );
            }
            out
        }
    };
    let failures: Vec<String> = report
        .suites
        .iter()
        .flat_map(|s| {
            s.failures()
                .map(move |c| format!("{} seed {} ({}): {}", s.name, c.seed, c.label, c.detail))
        })
        .collect();
    Ok(Output {
        body,
        property_failure: (!failures.is_empty()).then(|| failures.join("\n")),
    })
}
