use approx::assert_abs_diff_eq;
use lass0::data::{generate_orthogonal, generate_synthetic, SyntheticSpec};
use lass0::oracle::suites::{collinear_suite, dominance_suite, orthogonal_suite};
use lass0::oracle::{exhaustive_l0, hard_threshold_oracle, soft_threshold_oracle};
use lass0::{l0_objective, DenseMatrix, DenseVector, Error, SupportSet};

fn vecf(v: &[f64]) -> DenseVector {
    DenseVector::new(v.to_vec()).unwrap()
}

/// Objective of every support by direct dense least squares.
fn brute_force(x: &DenseMatrix, y: &DenseVector, lambda: f64) -> f64 {
    let p = x.cols();
    let ym = nalgebra::DVector::from_column_slice(y.as_slice());
    (0u64..1 << p)
        .map(|mask| {
            let s = SupportSet::from_mask(mask, p);
            let mut beta = vec![0.0; p];
            if !s.is_empty() {
                let xs = x.select_columns(s.indices()).unwrap().to_nalgebra();
                let b = xs.svd(true, true).solve(&ym, 1e-12).unwrap();
                for (k, &j) in s.indices().iter().enumerate() {
                    beta[j] = b[k];
                }
            }
            l0_objective(x, y, &vecf(&beta), lambda).unwrap()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn hand_enumerated_two_feature_case() {
    let x = DenseMatrix::identity(2).unwrap();
    let y = vecf(&[3.0, 0.5]);
    let r = exhaustive_l0(&x, &y, 2.0, 20).unwrap();
    assert_eq!(r.beta.as_slice(), &[3.0, 0.0]);
    assert_abs_diff_eq!(r.objective, 2.125, epsilon = 1e-12);
    assert_eq!(r.subsets_examined, 4);
}

#[test]
fn threshold_oracles() {
    assert_eq!(hard_threshold_oracle(&vecf(&[3.0, 1.0, 0.5]), 2.0).as_slice(), &[3.0, 0.0, 0.0]);
    assert_eq!(hard_threshold_oracle(&vecf(&[3.0, 1.2, 0.5]), 0.5).as_slice(), &[3.0, 1.2, 0.0]);
    assert_eq!(hard_threshold_oracle(&vecf(&[-1.0, 0.1]), 0.0).as_slice(), &[-1.0, 0.1]);
    assert_eq!(soft_threshold_oracle(&vecf(&[3.0, 1.0, -4.0]), 2.0).as_slice(), &[1.0, 0.0, -2.0]);
    assert_eq!(soft_threshold_oracle(&vecf(&[0.5, -0.5]), 1.0).as_slice(), &[0.0, 0.0]);
}

#[test]
fn exhaustive_matches_dense_brute_force() {
    for seed in 0..10 {
        let inst = generate_synthetic(&SyntheticSpec {
            n: 30,
            p: 7,
            sparsity: 3,
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        for lambda in [0.0, 0.1, 1.0, 10.0] {
            let r = exhaustive_l0(&inst.x, &inst.y, lambda, 20).unwrap();
            let expected = brute_force(&inst.x, &inst.y, lambda);
            assert_abs_diff_eq!(r.objective, expected, epsilon = 1e-9 * (1.0 + expected));
            assert_abs_diff_eq!(
                l0_objective(&inst.x, &inst.y, &r.beta, lambda).unwrap(),
                r.objective,
                epsilon = 1e-9
            );
        }
    }
}

#[test]
fn gray_code_path_matches_plain_enumeration() {
    // p = 14 takes the incremental route; p = 12 on a subset the direct one.
    let inst = generate_synthetic(&SyntheticSpec {
        n: 60,
        p: 14,
        sparsity: 4,
        seed: 77,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let r = exhaustive_l0(&inst.x, &inst.y, 0.4, 20).unwrap();
    assert_eq!(r.subsets_examined, 1 << 14);
    let expected = brute_force(&inst.x, &inst.y, 0.4);
    assert_abs_diff_eq!(r.objective, expected, epsilon = 1e-8 * (1.0 + expected));
}

#[test]
fn orthonormal_exhaustive_is_hard_thresholding() {
    for seed in 0..10 {
        let x = generate_orthogonal(9, 9, seed).unwrap();
        let y = lass0::oracle::suites::orthogonal_response(9, seed, 3.0);
        let xty = x.tr_mul_vec(&y).unwrap();
        let r = exhaustive_l0(&x, &y, 1.0, 20).unwrap();
        let h = hard_threshold_oracle(&xty, 1.0);
        for j in 0..9 {
            assert_abs_diff_eq!(r.beta[j], h[j], epsilon = 1e-10);
        }
    }
}

#[test]
fn refuses_large_problems() {
    let x = DenseMatrix::new(2, 21, vec![1.0; 42]).unwrap();
    let y = vecf(&[1.0, 2.0]);
    assert!(matches!(exhaustive_l0(&x, &y, 1.0, 20), Err(Error::TooManyFeatures { p: 21, max_p: 20 })));
}

#[test]
fn suites_pass_on_small_runs() {
    assert!(orthogonal_suite(10, 10, 10, &[0.5, 2.0, 5.0], 0).unwrap().passed());
    assert!(collinear_suite(15, 50, 8, &[1.0, -2.0, 0.5], 0).unwrap().passed());
    assert!(dominance_suite(15, 100, 12, 0.7, 0).unwrap().passed());
}
