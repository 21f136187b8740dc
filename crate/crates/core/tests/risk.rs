mod common;

use proptest::prelude::*;
use rand::Rng;
use robustlin::risk::{
    adversarial_risk, c0, c1, c2, excess_risk, mc_adversarial_risk, proxy_risks, standard_risk, RiskReport,
};
use robustlin::{AttackNorm, ProblemSpec};

#[test]
fn sandwich_constants() {
    assert!((c1() - 1.1124).abs() < 1e-4);
    assert!((c2() - 1.7979).abs() < 1e-4);
    assert_eq!(c1(), 2.0 / (1.0 + c0()));
}

#[test]
fn standard_risk_examples() {
    let p = ProblemSpec::new(vec![1.0, 1.0], vec![1.0, 0.0], 0.1).unwrap();
    assert!((standard_risk(&p, &p.w0()).unwrap() - 0.01).abs() < 1e-15);
    assert!((standard_risk(&p, &[0.0, 0.0]).unwrap() - 1.01).abs() < 1e-15);
    assert!((standard_risk(&p, &[0.5, 0.5]).unwrap() - 0.51).abs() < 1e-15);
}

#[test]
fn adversarial_risk_examples() {
    let mut rng = common::rng(5);
    let p = common::random_problem(&mut rng, 7, 0.2, 2.0);
    let w = common::gaussian(&mut rng, 7);
    for norm in [AttackNorm::l2(), AttackNorm::linf()] {
        assert_eq!(adversarial_risk(&p, &norm, &w, 0.0).unwrap(), standard_risk(&p, &w).unwrap());
        let null = p.sigma2() + p.w0_sigma_norm_sq();
        assert!((adversarial_risk(&p, &norm, &[0.0; 7], 1.7).unwrap() - null).abs() < 1e-14 * null);
    }
    assert!(adversarial_risk(&p, &AttackNorm::l2(), &w, -0.1).is_err());
}

#[test]
fn proxy_examples() {
    let p = ProblemSpec::new(vec![1.0], vec![1.0], 0.0).unwrap();
    let px = proxy_risks(&p, &AttackNorm::l2(), &[0.0], 2.0).unwrap();
    assert_eq!((px.bar, px.tilde, px.k), (1.0, 1.0, 1.0));
    let p = ProblemSpec::new(vec![1.0, 0.5], vec![1.0, 2.0], 0.3).unwrap();
    let px = proxy_risks(&p, &AttackNorm::linf(), &p.w0(), 0.0).unwrap();
    assert!((px.bar - 0.09).abs() < 1e-15 && (px.tilde - 0.09).abs() < 1e-15 && px.k == 0.0);
}

#[test]
fn excess_examples() {
    let p = ProblemSpec::new(vec![2.0, 1.0], vec![1.0, -1.0], 0.2).unwrap();
    assert_eq!(excess_risk(&p, &p.w0()).unwrap(), 0.0);
    assert!((excess_risk(&p, &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((excess_risk(&p, &p.w0().scaled(0.5)).unwrap() - 0.25).abs() < 1e-15);
    let r = RiskReport::compute(&p, &AttackNorm::l2(), &[0.5, 0.5], 0.3).unwrap();
    assert!(r.adversarial >= r.standard && r.proxy_bar <= r.proxy_tilde);
}

/// With `σ = 0` and `‖w − w_0‖_Σ = r‖w‖_⋆ = a`, `E = (2 + 2c₀)a² < 4a² = Ẽ`,
/// so `Ẽ` is not a lower bound on `E`.
#[test]
fn tilde_proxy_can_exceed_exact_risk() {
    let p = ProblemSpec::new(vec![1.0], vec![2.0], 0.0).unwrap();
    let w = [1.0];
    let px = proxy_risks(&p, &AttackNorm::l2(), &w, 1.0).unwrap();
    let e = adversarial_risk(&p, &AttackNorm::l2(), &w, 1.0).unwrap();
    assert!((e - (2.0 + 2.0 * c0())).abs() < 1e-14);
    assert_eq!(px.tilde, 4.0);
    assert!(e < px.tilde && e >= px.tilde / c1() - 1e-14);
}

#[test]
fn mc_matches_analytic_l2_and_linf() {
    let mut rng = common::rng(21);
    let p = common::random_problem(&mut rng, 20, 0.2, 2.0);
    for (norm, r, seed) in [(AttackNorm::l2(), 0.3, 1), (AttackNorm::linf(), 0.1, 2)] {
        let w = common::gaussian(&mut rng, 20);
        let exact = adversarial_risk(&p, &norm, &w, r).unwrap();
        let mc = mc_adversarial_risk(&p, &norm, &w, r, 1_000_000, seed).unwrap();
        let z = (mc.estimate - exact) / mc.std_error;
        assert!(z.abs() <= 3.0, "{norm}: z = {z}");
    }
}

#[test]
fn mc_special_cases_and_determinism() {
    let mut rng = common::rng(8);
    let p = common::random_problem(&mut rng, 5, 0.5, 1.5);
    let w = common::gaussian(&mut rng, 5);
    let norm = AttackNorm::l2();
    let a = mc_adversarial_risk(&p, &norm, &w, 0.4, 50_000, 9).unwrap();
    let b = mc_adversarial_risk(&p, &norm, &w, 0.4, 50_000, 9).unwrap();
    assert_eq!(a, b);
    let std = mc_adversarial_risk(&p, &norm, &w, 0.0, 200_000, 1).unwrap();
    assert!(((std.estimate - standard_risk(&p, &w).unwrap()) / std.std_error).abs() < 4.0);
    let null = mc_adversarial_risk(&p, &norm, &[0.0; 5], 3.0, 200_000, 2).unwrap();
    assert!(((null.estimate - p.sigma2() - p.w0_sigma_norm_sq()) / null.std_error).abs() < 4.0);
    assert!(mc_adversarial_risk(&p, &norm, &w, 0.4, 99, 1).is_err());
}

#[test]
fn mc_z_scores_within_four_on_randomized_trials() {
    let mut rng = common::rng(77);
    let trials = 200;
    let mut inside = 0;
    for i in 0..trials {
        let d = rng.random_range(1..=15);
        let p = common::random_problem(&mut rng, d, 0.1, 2.0);
        let w = common::gaussian(&mut rng, d);
        let r = rng.random_range(0.0..2.0);
        let norm = common::norm_by_index(i);
        let exact = adversarial_risk(&p, &norm, &w, r).unwrap();
        let mc = mc_adversarial_risk(&p, &norm, &w, r, 20_000, i as u64).unwrap();
        if ((mc.estimate - exact) / mc.std_error).abs() <= 4.0 {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.99 * trials as f64, "{inside}/{trials}");
}

fn arb_case() -> impl Strategy<Value = (ProblemSpec, AttackNorm, Vec<f64>, f64)> {
    (any::<u64>(), 1usize..10, 0usize..3, 0.0f64..3.0).prop_map(|(seed, d, k, r)| {
        let mut rng = common::rng(seed);
        let p = common::random_problem(&mut rng, d, 0.05, 4.0);
        let w: Vec<f64> = common::gaussian(&mut rng, d).iter().map(|x| 2.0 * x).collect();
        (p, common::norm_by_index(k), w, r)
    })
}

proptest! {
    #[test]
    fn proxy_sandwiches_hold((p, norm, w, r) in arb_case()) {
        let e = adversarial_risk(&p, &norm, &w, r).unwrap();
        let px = proxy_risks(&p, &norm, &w, r).unwrap();
        let tol = 1e-12 * e;
        prop_assert!(px.bar <= px.tilde + tol);
        prop_assert!(px.bar <= e + tol && e <= c2() * px.bar + tol);
        prop_assert!(px.tilde / c1() <= e + tol && e <= c2() * px.tilde + tol);
        if p.noise_sd() == 0.0 {
            prop_assert!(e <= px.tilde + tol);
        }
    }

    #[test]
    fn noiseless_tilde_upper_bound((p, norm, w, r) in arb_case()) {
        let p = p.with_noise_sd(0.0).unwrap();
        let e = adversarial_risk(&p, &norm, &w, r).unwrap();
        let px = proxy_risks(&p, &norm, &w, r).unwrap();
        prop_assert!(e <= px.tilde * (1.0 + 1e-12));
    }

    #[test]
    fn adversarial_risk_is_convex_in_w((p, norm, w, r) in arb_case(), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let v = common::gaussian(&mut rng, w.len());
        let mid: Vec<f64> = w.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |x: &[f64]| adversarial_risk(&p, &norm, x, r).unwrap();
        let rhs = 0.5 * (f(&w) + f(&v));
        prop_assert!(f(&mid) <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn adversarial_risk_monotone_and_continuous_in_r((p, norm, w, _r) in arb_case()) {
        let grid: Vec<f64> = (0..=200).map(|i| 3.0 * i as f64 / 200.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| adversarial_risk(&p, &norm, &w, r).unwrap()).collect();
        let b = dual_slope(&norm, &w);
        let e0 = vals[0];
        for k in 1..vals.len() {
            prop_assert!(vals[k] >= vals[k - 1]);
            // Lipschitz on [0, 3]: dE/dr = 2b²r + 2c₀b√E ≤ 6b² + 2c₀b√E.
            let h = grid[k] - grid[k - 1];
            prop_assert!(vals[k] - vals[k - 1] <= h * (6.0 * b * b + 2.0 * c0() * b * e0.sqrt()) * (1.0 + 1e-9));
        }
    }
}

fn dual_slope(norm: &AttackNorm, w: &[f64]) -> f64 {
    robustlin::dual_norm(norm, w).unwrap()
}
