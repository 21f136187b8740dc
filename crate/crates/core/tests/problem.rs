mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use robustlin::problem::{generate_coeffs, generate_spectrum, lp_norm};
use robustlin::{dual_norm, sigma_norm, AttackNorm, Error, Exponent, ProblemSpec};

#[test]
fn dual_norm_examples() {
    assert!((dual_norm(&AttackNorm::l2(), &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);
    assert_eq!(dual_norm(&AttackNorm::linf(), &[1.0, -2.0, 3.0]).unwrap(), 6.0);
    assert_eq!(dual_norm(&AttackNorm::lp(1.0).unwrap(), &[1.0, -7.0, 3.0]).unwrap(), 7.0);
    assert_eq!(dual_norm(&AttackNorm::l2(), &[0.0; 4]).unwrap(), 0.0);
}

/// Maximizes `δᵀw` over the unit ℓ3 sphere by sampling: 10⁵ random
/// directions, then a shrinking random walk from the best one.
fn sampled_sup_l3(w: &[f64], seed: u64) -> f64 {
    let mut rng = common::rng(seed);
    let p = Exponent::Finite(3.0);
    let normalize = |v: Vec<f64>| {
        let n = lp_norm(&v, p);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let dot = |v: &[f64]| v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let mut best = normalize(common::gaussian(&mut rng, w.len()));
    let mut best_val = dot(&best);
    for _ in 0..100_000 {
        let v = normalize(common::gaussian(&mut rng, w.len()));
        let val = dot(&v);
        if val > best_val {
            (best, best_val) = (v, val);
        }
    }
    let mut scale = 0.1;
    for _ in 0..200 {
        for _ in 0..100 {
            let step: Vec<f64> = best.iter().map(|x| x + scale * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let v = normalize(step);
            let val = dot(&v);
            if val > best_val {
                (best, best_val) = (v, val);
            }
        }
        scale *= 0.97;
    }
    best_val
}

#[test]
fn l3_dual_norm_matches_sampled_sup() {
    let mut rng = common::rng(11);
    let w = common::gaussian(&mut rng, 10);
    let exact = dual_norm(&AttackNorm::lp(3.0).unwrap(), &w).unwrap();
    let sampled = sampled_sup_l3(&w, 12);
    assert!(sampled <= exact + 1e-9, "sampled sup {sampled} exceeds dual norm {exact}");
    assert!(sampled >= 0.99 * exact, "sampled sup {sampled} below 99% of {exact}");
}

#[test]
fn sigma_norm_examples() {
    let p = ProblemSpec::new(vec![1.0, 1.0], vec![1.0, 0.0], 0.0).unwrap();
    assert!((sigma_norm(&p, &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);
    let p = ProblemSpec::new(vec![4.0, 1.0], vec![1.0, 0.0], 0.0).unwrap();
    assert_eq!(sigma_norm(&p, &[1.0, 0.0]).unwrap(), 2.0);
    let p = ProblemSpec::new(vec![2.0, 0.5, 0.25], vec![1.0, 0.0, 0.0], 0.0).unwrap();
    assert!((sigma_norm(&p, &[1.0, 1.0, 1.0]).unwrap() - 2.75f64.sqrt()).abs() < 1e-15);
    assert!(matches!(sigma_norm(&p, &[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn invalid_problems_are_rejected() {
    assert!(ProblemSpec::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.0).is_err());
    assert!(ProblemSpec::new(vec![1.0, 0.0], vec![1.0, 1.0], 0.0).is_err());
    assert!(ProblemSpec::new(vec![1.0], vec![1.0, 1.0], 0.0).is_err());
    assert!(ProblemSpec::new(vec![1.0, 1.0], vec![0.0, 0.0], 0.0).is_err());
    assert!(ProblemSpec::new(vec![1.0], vec![1.0], -0.1).is_err());
    assert!(ProblemSpec::new(vec![], vec![], 0.0).is_err());
    assert!(AttackNorm::lp(0.5).is_err());
    assert!(AttackNorm::mahalanobis(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    assert!(dual_norm(&AttackNorm::l2(), &[f64::NAN]).is_err());
}

#[test]
fn sigma_norm_of_w0_is_spectral_sum() {
    let mut rng = common::rng(3);
    for d in [1, 5, 40] {
        let p = common::random_problem(&mut rng, d, 0.1, 3.0);
        let direct: f64 = p.eigenvalues().iter().zip(p.coeffs()).map(|(l, c)| l * c * c).sum();
        assert_eq!(p.w0_sigma_norm_sq(), direct);
        assert!((sigma_norm(&p, &p.w0()).unwrap().powi(2) - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn toml_round_trip_and_shorthands() {
    let p = ProblemSpec::new(vec![2.0, 1.0, 0.5], vec![1.0, -0.5, 0.25], 0.3).unwrap();
    assert_eq!(ProblemSpec::from_toml_str(&p.to_toml_string()).unwrap(), p);

    let p = ProblemSpec::from_toml_str("d = 4\nspectrum = \"poly(2)\"\ncoeffs = \"sparse(2)\"\nnoise_sd = 0.1").unwrap();
    assert_eq!(p.eigenvalues(), &[1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0]);
    assert_eq!(p.coeffs(), &[1.0, 1.0, 0.0, 0.0]);
    assert_eq!(generate_spectrum("weak_strong(2, 0.5)", 3).unwrap(), vec![1.0, 1.0, 0.25]);
    assert_eq!(generate_coeffs("harmonic", 3).unwrap(), vec![1.0, 0.5, 1.0 / 3.0]);
    assert!(ProblemSpec::from_toml_str("spectrum = \"isotropic\"\ncoeffs = \"ones\"").is_err());
    assert!(ProblemSpec::from_toml_str("eigenvalues = [1.0]\ncoeffs = [1.0]\nbogus = 2").is_err());
}

#[test]
fn mahalanobis_dual_is_inverse_norm() {
    let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let norm = AttackNorm::mahalanobis(b.clone()).unwrap();
    let w = [0.3, -1.2];
    let binv = b.try_inverse().unwrap();
    let wv = nalgebra::DVector::from_column_slice(&w);
    let expected = (wv.transpose() * &binv * &wv)[(0, 0)].sqrt();
    assert!((dual_norm(&norm, &w).unwrap() - expected).abs() < 1e-13);
    assert!(dual_norm(&norm, &[1.0, 2.0, 3.0]).is_err());
}

fn arb_norm() -> impl Strategy<Value = AttackNorm> {
    prop_oneof![
        Just(AttackNorm::l2()),
        Just(AttackNorm::linf()),
        Just(AttackNorm::lp(1.0).unwrap()),
        (1.05f64..8.0).prop_map(|p| AttackNorm::lp(p).unwrap()),
    ]
}

proptest! {
    #[test]
    fn dual_norm_is_homogeneous(norm in arb_norm(), w in prop::collection::vec(-5.0f64..5.0, 1..12), a in -10.0f64..10.0) {
        let scaled: Vec<f64> = w.iter().map(|x| a * x).collect();
        let lhs = dual_norm(&norm, &scaled).unwrap();
        let rhs = a.abs() * dual_norm(&norm, &w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn holder_consistency(norm in arb_norm(), seed in any::<u64>(), d in 1usize..12) {
        let mut rng = common::rng(seed);
        let w = common::gaussian(&mut rng, d);
        let dual = dual_norm(&norm, &w).unwrap();
        for _ in 0..50 {
            let z = common::gaussian(&mut rng, d);
            let zn = norm.primal_norm(&z).unwrap();
            let shrink = rng.random_range(0.0..=1.0) / zn;
            let dot: f64 = z.iter().zip(&w).map(|(a, b)| a * b * shrink).sum();
            prop_assert!(dot <= dual + 1e-9);
        }
    }

    #[test]
    fn mahalanobis_holder(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = common::rng(seed);
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let b = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
        let norm = AttackNorm::mahalanobis(b).unwrap();
        let w = common::gaussian(&mut rng, d);
        let dual = dual_norm(&norm, &w).unwrap();
        for _ in 0..50 {
            let z = common::gaussian(&mut rng, d);
            let zn = norm.primal_norm(&z).unwrap();
            let dot: f64 = z.iter().zip(&w).map(|(a, b)| a * b / zn).sum();
            prop_assert!(dot <= dual * (1.0 + 1e-10) + 1e-12);
        }
    }
}
