//! Shared generators for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robustlin::{AttackNorm, ProblemSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Descending spectrum in `[lo, hi]`, Gaussian coefficients, noise in `[0, 0.5)`.
pub fn random_problem(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> ProblemSpec {
    let mut eig: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let coeffs = gaussian(rng, d);
    let sigma = rng.random_range(0.0..0.5);
    ProblemSpec::new(eig, coeffs, sigma).unwrap()
}

pub fn isotropic(d: usize, coeffs: Vec<f64>, sigma: f64) -> ProblemSpec {
    ProblemSpec::new(vec![1.0; d], coeffs, sigma).unwrap()
}

/// Cycles through ℓ2, ℓ∞ and ℓ3.
pub fn norm_by_index(i: usize) -> AttackNorm {
    match i % 3 {
        0 => AttackNorm::l2(),
        1 => AttackNorm::linf(),
        _ => AttackNorm::lp(3.0).unwrap(),
    }
}

pub fn poly_problem(d: usize, beta: f64, delta: f64, sigma: f64) -> ProblemSpec {
    let eig = (1..=d).map(|k| (k as f64).powf(-beta)).collect();
    let coeffs = (1..=d).map(|k| (k as f64).powf(-delta / 2.0)).collect();
    ProblemSpec::new(eig, coeffs, sigma).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Spearman rank correlation, no tie correction.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (a, b) = (rank(x), rank(y));
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// `‖w − w_0‖_Σ²` computed directly.
pub fn sigma_dist_sq(problem: &ProblemSpec, w: &[f64]) -> f64 {
    problem.eigenvalues().iter().zip(problem.coeffs()).zip(w).map(|((l, c), x)| l * (x - c).powi(2)).sum()
}
