//! Synthetic instances, verification fixtures, and CSV ingestion.
//!
//! All randomness comes from [`rng::stream`], so every generator is a pure
//! function of its arguments.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{DenseMatrix, DenseVector, SupportSet};

pub mod rng {
    //! Seeded random streams.
    //!
    //! Every draw comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
    //! `seed_from_u64(seed)` and switched to a 64-bit stream id with
    //! `set_stream`. Stream ids are `purpose << 48 | group << 16 | fold`, so
    //! each (instance, fold) pair owns an independent stream.

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Generator family echoed into experiment reports.
    pub const FAMILY: &str =
        "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream = purpose<<48 | group<<16 | fold";

    pub const INSTANCE: u64 = 1;
    pub const ORTHOGONAL: u64 = 2;
    pub const OUTER_FOLDS: u64 = 3;
    pub const INNER_FOLDS: u64 = 4;
    pub const CHECK: u64 = 5;

    pub fn stream_id(purpose: u64, group: u64, fold: u64) -> u64 {
        purpose << 48 | (group & 0xffff_ffff) << 16 | (fold & 0xffff)
    }

    pub fn stream(seed: u64, purpose: u64, group: u64, fold: u64) -> ChaCha8Rng {
        with_stream_id(seed, stream_id(purpose, group, fold))
    }

    pub fn with_stream_id(seed: u64, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        rng
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationModel {
    /// Equal correlation `rho` between every pair of features.
    #[default]
    Compound,
    /// Correlation `rho^|i-j|`.
    Ar1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    /// Number of true nonzero coefficients.
    pub sparsity: usize,
    pub correlation_model: CorrelationModel,
    pub rho: f64,
    pub noise_sigma: f64,
    /// Feature means; zeros when unset.
    pub mu: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 200,
            p: 20,
            sparsity: 5,
            correlation_model: CorrelationModel::Compound,
            rho: 0.7,
            noise_sigma: 0.5,
            mu: None,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(self.n >= 1 && self.p >= 1, || {
            format!("need n >= 1 and p >= 1, got n={} p={}", self.n, self.p)
        })?;
        ensure(self.sparsity <= self.p, || {
            format!("sparsity {} exceeds p = {}", self.sparsity, self.p)
        })?;
        ensure((0.0..1.0).contains(&self.rho), || {
            format!("rho must lie in [0, 1), got {}", self.rho)
        })?;
        ensure(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0, || {
            format!("noise_sigma must be nonnegative, got {}", self.noise_sigma)
        })?;
        if let Some(mu) = &self.mu {
            ensure(mu.len() == self.p, || {
                format!("mu has length {} for p = {}", mu.len(), self.p)
            })?;
            ensure(mu.iter().all(|v| v.is_finite()), || "mu must be finite".into())?;
        }
        Ok(())
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.p;
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else {
                match self.correlation_model {
                    CorrelationModel::Compound => self.rho,
                    CorrelationModel::Ar1 => self.rho.powi(i.abs_diff(j) as i32),
                }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub x: DenseMatrix,
    pub y: DenseVector,
    pub beta_true: DenseVector,
    pub support_true: SupportSet,
}

/// Draws, in order from one stream: the true support, its coefficients
/// (Uniform(-1, 1), zero draws rejected), the rows of `X` from `N(mu, Sigma)`,
/// and the noise.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = rng::stream(spec.seed, rng::INSTANCE, 0, 0);

    let mut support = rand::seq::index::sample(&mut rng, p, spec.sparsity).into_vec();
    support.sort_unstable();
    let coef = Uniform::new(-1.0, 1.0).expect("valid range");
    let mut beta = vec![0.0; p];
    for &j in &support {
        beta[j] = loop {
            let v: f64 = coef.sample(&mut rng);
            if v != 0.0 {
                break v;
            }
        };
    }

    let chol = spec
        .covariance()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?;
    let l = chol.l();
    let mu = spec.mu.clone().unwrap_or_else(|| vec![0.0; p]);
    let mut data = vec![0.0; n * p];
    for i in 0..n {
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let row = &l * z;
        for j in 0..p {
            data[j * n + i] = mu[j] + row[j];
        }
    }
    let x = DenseMatrix::new(n, p, data)?;
    let beta_true = DenseVector::new(beta)?;

    let signal = x.mul_vec(&beta_true)?;
    let y: Vec<f64> = signal
        .iter()
        .map(|s| s + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    Ok(SyntheticInstance {
        support_true: SupportSet::new(support, p)?,
        x,
        y: DenseVector::new(y)?,
        beta_true,
    })
}

/// `n x p` matrix with orthonormal columns: the Q factor of a Gaussian matrix.
pub fn generate_orthogonal(n: usize, p: usize, seed: u64) -> Result<DenseMatrix> {
    ensure(p >= 1 && p <= n, || format!("need 1 <= p <= n, got n={n} p={p}"))?;
    let mut rng = rng::stream(seed, rng::ORTHOGONAL, 0, 0);
    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    DenseMatrix::from_nalgebra(&q)
}

/// Copy of `x` with column `i` replaced by `k` times column `j`.
pub fn inject_collinear(x: &DenseMatrix, i: usize, j: usize, k: f64) -> Result<DenseMatrix> {
    ensure(i < x.cols() && j < x.cols(), || {
        format!("columns {i}, {j} outside 0..{}", x.cols())
    })?;
    ensure(i != j, || "collinear columns must differ".into())?;
    ensure(k != 0.0 && k.is_finite(), || {
        format!("scale must be finite and nonzero, got {k}")
    })?;
    let src: Vec<f64> = x.col(j).iter().map(|v| k * v).collect();
    let mut out = x.clone();
    out.col_mut(i).copy_from_slice(&src);
    Ok(out)
}

/// Which column of a CSV file holds the response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetColumn {
    Index(usize),
    /// Exact, case-sensitive header match.
    Name(String),
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvDataset {
    pub x: DenseMatrix,
    pub y: DenseVector,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

/// Reads a numeric CSV: comma separated, optional single header row, no
/// quoting. Features are all non-target columns in file order.
pub fn load_csv(path: &Path, has_header: bool, target: &TargetColumn) -> Result<CsvDataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |row: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_reader(file);

    let mut records = reader.records();
    let mut header: Option<Vec<String>> = None;
    if has_header {
        match records.next() {
            Some(Ok(r)) => header = Some(r.iter().map(|s| s.trim().to_string()).collect()),
            Some(Err(e)) => return Err(csv_err(1, e.to_string())),
            None => return Err(csv_err(1, "file is empty".into())),
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for (k, rec) in records.enumerate() {
        let line = k + 1 + usize::from(has_header);
        let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        match width {
            Some(w) if w != rec.len() => {
                return Err(csv_err(line, format!("expected {w} fields, found {}", rec.len())))
            }
            None => width = Some(rec.len()),
            _ => {}
        }
        let mut row = Vec::with_capacity(rec.len());
        for (c, field) in rec.iter().enumerate() {
            let field = field.trim();
            if field.contains('"') {
                return Err(csv_err(line, format!("column {c}: quoted fields are not supported")));
            }
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| csv_err(line, format!("column {c}: non-numeric value {field:?}")))?;
            row.push(v);
        }
        rows.push(row);
    }

    let width = width.unwrap_or(0);
    if rows.is_empty() {
        return Err(csv_err(0, "no data rows".into()));
    }
    if width < 2 {
        return Err(csv_err(0, format!("need at least 2 columns, found {width}")));
    }
    let names = header.unwrap_or_else(|| (0..width).map(|c| format!("x{c}")).collect());
    let t = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(c) if *c < width => *c,
        TargetColumn::Index(c) => {
            return Err(csv_err(0, format!("target column {c} outside 0..{width}")))
        }
        TargetColumn::Name(name) => names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(0, format!("no column named {name:?}")))?,
    };

    let y = DenseVector::new(rows.iter().map(|r| r[t]).collect())?;
    let features: Vec<usize> = (0..width).filter(|&c| c != t).collect();
    let mut data = Vec::with_capacity(rows.len() * features.len());
    for &c in &features {
        data.extend(rows.iter().map(|r| r[c]));
    }
    Ok(CsvDataset {
        x: DenseMatrix::new(rows.len(), features.len(), data)?,
        y,
        feature_names: features.iter().map(|&c| names[c].clone()).collect(),
        target_name: names[t].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = SyntheticSpec {
            n: 30,
            p: 6,
            sparsity: 3,
            seed: 42,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.beta_true.count_nonzero(), 3);
        assert_eq!(a.support_true, SupportSet::of(&a.beta_true));
        assert!(a.beta_true.iter().all(|v| (-1.0..1.0).contains(v)));
        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn empty_truth_is_pure_noise() {
        let spec = SyntheticSpec {
            n: 20,
            p: 4,
            sparsity: 0,
            noise_sigma: 0.0,
            ..SyntheticSpec::default()
        };
        let inst = generate_synthetic(&spec).unwrap();
        assert_eq!(inst.beta_true.count_nonzero(), 0);
        assert!(inst.y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn spec_validation() {
        let bad = [
            SyntheticSpec { sparsity: 30, ..SyntheticSpec::default() },
            SyntheticSpec { rho: 1.0, ..SyntheticSpec::default() },
            SyntheticSpec { n: 0, ..SyntheticSpec::default() },
            SyntheticSpec { noise_sigma: -1.0, ..SyntheticSpec::default() },
            SyntheticSpec { mu: Some(vec![0.0; 3]), ..SyntheticSpec::default() },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn orthogonal_columns() {
        for (n, p, seed) in [(10, 10, 1), (25, 7, 2), (25, 7, 3)] {
            let q = generate_orthogonal(n, p, seed).unwrap().to_nalgebra();
            let gram = q.transpose() * &q;
            let err = (gram - DMatrix::<f64>::identity(p, p)).amax();
            assert!(err < 1e-12, "{err}");
        }
        assert_ne!(generate_orthogonal(8, 3, 2).unwrap(), generate_orthogonal(8, 3, 3).unwrap());
        assert!(generate_orthogonal(3, 4, 0).is_err());
    }

    #[test]
    fn collinear_injection() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let same = inject_collinear(&x, 0, 1, 1.0).unwrap();
        assert_eq!(same.col(0), same.col(1));
        let neg = inject_collinear(&x, 2, 0, -2.0).unwrap();
        assert_eq!(neg.col(2), &[-2.0, -8.0]);
        let back = inject_collinear(&inject_collinear(&x, 2, 0, 4.0).unwrap(), 0, 2, 0.25).unwrap();
        assert_eq!(back.col(0), x.col(0));
        assert!(inject_collinear(&x, 0, 1, 0.0).is_err());
        assert!(inject_collinear(&x, 1, 1, 2.0).is_err());
        assert!(inject_collinear(&x, 0, 3, 2.0).is_err());
    }

    #[test]
    fn csv_with_header() {
        let f = write_tmp("a,b,target\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(f.path(), true, &TargetColumn::Last).unwrap();
        assert_eq!((d.x.rows(), d.x.cols()), (3, 2));
        assert_eq!(d.y.as_slice(), &[3.0, 6.0, 9.0]);
        assert_eq!(d.feature_names, vec!["a", "b"]);
        let d = load_csv(f.path(), true, &TargetColumn::Name("a".into())).unwrap();
        assert_eq!(d.y.as_slice(), &[1.0, 4.0, 7.0]);
        assert_eq!(d.feature_names, vec!["b", "target"]);
        assert!(load_csv(f.path(), true, &TargetColumn::Name("A".into())).is_err());
        let d = load_csv(f.path(), true, &TargetColumn::Index(1)).unwrap();
        assert_eq!(d.target_name, "b");
    }

    #[test]
    fn csv_errors_name_the_row() {
        let f = write_tmp("a,b\n1,2\nNA,3\n");
        match load_csv(f.path(), true, &TargetColumn::Last) {
            Err(Error::Csv { row, message, .. }) => {
                assert_eq!(row, 3);
                assert!(message.contains("NA"));
            }
            other => panic!("{other:?}"),
        }
        let f = write_tmp("1,\"2\"\n");
        assert!(matches!(load_csv(f.path(), false, &TargetColumn::Last), Err(Error::Csv { .. })));
        let f = write_tmp("1\n2\n");
        assert!(load_csv(f.path(), false, &TargetColumn::Last).is_err());
        let f = write_tmp("a,b\n");
        assert!(load_csv(f.path(), true, &TargetColumn::Last).is_err());
        let f = write_tmp("1,2\n3,4,5\n");
        assert!(load_csv(f.path(), false, &TargetColumn::Last).is_err());
        let missing = Path::new("/nonexistent/file.csv");
        assert!(matches!(load_csv(missing, true, &TargetColumn::Last), Err(Error::Io { .. })));
    }
}
