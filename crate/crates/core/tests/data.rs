use approx::assert_abs_diff_eq;
use lass0::data::{
    generate_orthogonal, generate_synthetic, inject_collinear, load_csv, CorrelationModel, SyntheticSpec,
    TargetColumn,
};
use lass0::Error;

fn sample_covariance(x: &lass0::DenseMatrix) -> Vec<Vec<f64>> {
    let (n, p) = (x.rows(), x.cols());
    let means: Vec<f64> = (0..p).map(|j| x.col(j).iter().sum::<f64>() / n as f64).collect();
    (0..p)
        .map(|a| {
            (0..p)
                .map(|b| {
                    x.col(a)
                        .iter()
                        .zip(x.col(b))
                        .map(|(u, v)| (u - means[a]) * (v - means[b]))
                        .sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect()
}

#[test]
fn empirical_covariance_matches_the_model() {
    for (model, rho, seed) in [
        (CorrelationModel::Compound, 0.7, 1),
        (CorrelationModel::Ar1, 0.6, 2),
        (CorrelationModel::Compound, 0.0, 3),
    ] {
        let spec = SyntheticSpec {
            n: 6000,
            p: 5,
            correlation_model: model,
            rho,
            seed,
            ..SyntheticSpec::default()
        };
        let inst = generate_synthetic(&spec).unwrap();
        let sigma = spec.covariance();
        let cov = sample_covariance(&inst.x);
        let tol = 5.0 / (spec.n as f64).sqrt();
        for a in 0..5 {
            for b in 0..5 {
                assert!(
                    (cov[a][b] - sigma[(a, b)]).abs() < tol,
                    "{model:?} ({a},{b}): {} vs {}",
                    cov[a][b],
                    sigma[(a, b)]
                );
            }
        }
    }
}

#[test]
fn feature_means_are_applied() {
    let spec = SyntheticSpec {
        n: 5000,
        p: 3,
        sparsity: 1,
        mu: Some(vec![1.0, -2.0, 10.0]),
        seed: 4,
        ..SyntheticSpec::default()
    };
    let inst = generate_synthetic(&spec).unwrap();
    for (j, m) in [1.0, -2.0, 10.0].into_iter().enumerate() {
        let mean = inst.x.col(j).iter().sum::<f64>() / 5000.0;
        assert!((mean - m).abs() < 5.0 / 5000f64.sqrt());
    }
}

#[test]
fn instances_are_pure_functions_of_the_spec() {
    let spec = SyntheticSpec {
        n: 30,
        p: 8,
        sparsity: 3,
        seed: 99,
        ..SyntheticSpec::default()
    };
    let a = generate_synthetic(&spec).unwrap();
    assert_eq!(a, generate_synthetic(&spec).unwrap());
    assert_eq!(a.beta_true.count_nonzero(), 3);
    assert_eq!(a.support_true.len(), 3);
    assert!(a.support_true.iter().all(|j| a.beta_true[j] != 0.0));
    let b = generate_synthetic(&SyntheticSpec { seed: 100, ..spec }).unwrap();
    assert_ne!(a.x, b.x);
}

#[test]
fn zero_sparsity_response_is_pure_noise() {
    let spec = SyntheticSpec {
        n: 50,
        p: 4,
        sparsity: 0,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let inst = generate_synthetic(&spec).unwrap();
    assert!(inst.support_true.is_empty());
    assert_eq!(inst.beta_true.count_nonzero(), 0);
    let silent = generate_synthetic(&SyntheticSpec {
        noise_sigma: 0.0,
        ..spec
    })
    .unwrap();
    assert!(silent.y.iter().all(|v| *v == 0.0));
}

#[test]
fn invalid_specs_are_rejected() {
    let base = SyntheticSpec::default();
    for bad in [
        SyntheticSpec { sparsity: 21, ..base.clone() },
        SyntheticSpec { rho: 1.0, ..base.clone() },
        SyntheticSpec { noise_sigma: -1.0, ..base.clone() },
        SyntheticSpec { mu: Some(vec![0.0; 3]), ..base.clone() },
        SyntheticSpec { n: 0, ..base.clone() },
    ] {
        assert!(matches!(generate_synthetic(&bad), Err(Error::InvalidArgument(_))), "{bad:?}");
    }
}

#[test]
fn orthogonal_designs_are_orthonormal() {
    for (n, p, seed) in [(10, 10, 0), (25, 7, 1), (25, 7, 2)] {
        let x = generate_orthogonal(n, p, seed).unwrap();
        for a in 0..p {
            for b in 0..p {
                let d: f64 = x.col(a).iter().zip(x.col(b)).map(|(u, v)| u * v).sum();
                assert_abs_diff_eq!(d, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }
    assert_ne!(generate_orthogonal(25, 7, 1).unwrap(), generate_orthogonal(25, 7, 2).unwrap());
    assert!(generate_orthogonal(3, 4, 0).is_err());
}

#[test]
fn collinear_injection() {
    let x = generate_orthogonal(6, 3, 0).unwrap();
    let same = inject_collinear(&x, 2, 0, 1.0).unwrap();
    assert_eq!(same.col(2), x.col(0));
    let scaled = inject_collinear(&x, 1, 0, -2.0).unwrap();
    for (a, b) in scaled.col(1).iter().zip(x.col(0)) {
        assert_eq!(*a, -2.0 * b);
    }
    assert_eq!(scaled.col(2), x.col(2));
    let back = inject_collinear(&inject_collinear(&x, 1, 0, 4.0).unwrap(), 1, 0, 1.0).unwrap();
    assert_eq!(back.col(1), x.col(0));
    assert!(inject_collinear(&x, 1, 0, 0.0).is_err());
    assert!(inject_collinear(&x, 1, 1, 2.0).is_err());
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "a,B,y\n1,2,3\n4,5,6\n7,8,9\n").unwrap();
    let d = load_csv(&path, true, &TargetColumn::Last).unwrap();
    assert_eq!((d.x.rows(), d.x.cols()), (3, 2));
    assert_eq!(d.y.as_slice(), &[3.0, 6.0, 9.0]);
    assert_eq!(d.feature_names, ["a", "B"]);

    let d = load_csv(&path, true, &TargetColumn::Name("B".into())).unwrap();
    assert_eq!(d.y.as_slice(), &[2.0, 5.0, 8.0]);
    assert_eq!(d.x.col(1), &[3.0, 6.0, 9.0]);
    assert!(load_csv(&path, true, &TargetColumn::Name("b".into())).is_err());

    let d = load_csv(&path, false, &TargetColumn::Index(0)).unwrap_err();
    assert!(matches!(d, Error::Csv { row: 1, .. }), "{d}");

    std::fs::write(&path, "a,y\n1,2\nNA,3\n").unwrap();
    let err = load_csv(&path, true, &TargetColumn::Last).unwrap_err();
    assert!(err.to_string().contains("row 3"), "{err}");

    std::fs::write(&path, "a,y\n").unwrap();
    assert!(load_csv(&path, true, &TargetColumn::Last).is_err());
    std::fs::write(&path, "y\n1\n").unwrap();
    assert!(load_csv(&path, true, &TargetColumn::Last).is_err());
    assert!(matches!(
        load_csv(&dir.path().join("missing.csv"), true, &TargetColumn::Last),
        Err(Error::Io { .. })
    ));
}
