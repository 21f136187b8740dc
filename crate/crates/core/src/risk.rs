//! Exact adversarial risk, its two proxies, and a Monte-Carlo oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problem::{sigma_dist_sq, AttackNorm, ProblemSpec};

/// `√(2/π)`, the mean absolute value of a standard normal.
pub fn c0() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

/// Sandwich constant for `Ẽ`: `Ẽ/c₁ ≤ E`, with `E ≤ Ẽ` when `σ = 0`
/// and `E ≤ c₂·Ẽ` in general.
pub fn c1() -> f64 {
    2.0 / (1.0 + c0())
}

/// Sandwich constant for `Ē`: `Ē ≤ E ≤ c₂·Ē`.
pub fn c2() -> f64 {
    1.0 + c0()
}

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid(format!("attack strength must be finite and non-negative, got {r}")));
    }
    Ok(())
}

/// `E(w) = σ² + ‖w − w_0‖_Σ²`.
pub fn standard_risk(problem: &ProblemSpec, w: &[f64]) -> Result<f64> {
    problem.check_dim(w)?;
    Ok(problem.sigma2() + sigma_dist_sq(problem, w))
}

/// `E(w,r) = E + r²‖w‖_⋆² + 2√(2/π)·r‖w‖_⋆·√E`.
pub fn adversarial_risk(problem: &ProblemSpec, norm: &AttackNorm, w: &[f64], r: f64) -> Result<f64> {
    check_r(r)?;
    let e = standard_risk(problem, w)?;
    let b = r * crate::problem::dual_norm(norm, w)?;
    Ok(e + b * b + 2.0 * c0() * b * e.sqrt())
}

/// The proxies `Ē = σ² + a² + b²`, `Ẽ = σ² + K²` and `K = a + b`, where
/// `a = ‖w − w_0‖_Σ` and `b = r‖w‖_⋆`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProxyRisks {
    pub bar: f64,
    pub tilde: f64,
    pub k: f64,
}

pub fn proxy_risks(problem: &ProblemSpec, norm: &AttackNorm, w: &[f64], r: f64) -> Result<ProxyRisks> {
    check_r(r)?;
    problem.check_dim(w)?;
    let a = sigma_dist_sq(problem, w).sqrt();
    let b = r * crate::problem::dual_norm(norm, w)?;
    let s2 = problem.sigma2();
    let k = a + b;
    Ok(ProxyRisks { bar: s2 + a * a + b * b, tilde: s2 + k * k, k })
}

/// `Δ(w) = (E(w) − σ²)/‖w_0‖_Σ²`.
pub fn excess_risk(problem: &ProblemSpec, w: &[f64]) -> Result<f64> {
    problem.check_dim(w)?;
    let s = problem.w0_sigma_norm_sq();
    if s == 0.0 {
        return Err(Error::Divergent("‖w_0‖_Σ = 0".into()));
    }
    Ok(sigma_dist_sq(problem, w) / s)
}

/// Every risk functional of one model at one attack strength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskReport {
    pub standard: f64,
    pub adversarial: f64,
    pub proxy_bar: f64,
    pub proxy_tilde: f64,
    pub k_value: f64,
    pub excess: f64,
}

impl RiskReport {
    pub fn compute(problem: &ProblemSpec, norm: &AttackNorm, w: &[f64], r: f64) -> Result<Self> {
        let p = proxy_risks(problem, norm, w, r)?;
        Ok(RiskReport {
            standard: standard_risk(problem, w)?,
            adversarial: adversarial_risk(problem, norm, w, r)?,
            proxy_bar: p.bar,
            proxy_tilde: p.tilde,
            k_value: p.k,
            excess: excess_risk(problem, w)?,
        })
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Samples per substream; fixed so the result does not depend on the worker count.
const MC_CHUNK: usize = 1 << 14;

/// Running `(count, mean, M2)` merged in chunk order.
#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }
}

/// Samples `(|xᵀw − y| + r‖w‖_⋆)²` with `x_k = √λ_k z_k` and independent label
/// noise. Chunk `j` draws from ChaCha stream `j` of `seed`.
pub fn mc_adversarial_risk(
    problem: &ProblemSpec,
    norm: &AttackNorm,
    w: &[f64],
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_r(r)?;
    problem.check_dim(w)?;
    if n_samples < 100 {
        return Err(invalid(format!("need at least 100 samples, got {n_samples}")));
    }
    let b = r * crate::problem::dual_norm(norm, w)?;
    let scaled: Vec<f64> = problem
        .eigenvalues()
        .iter()
        .zip(problem.coeffs())
        .zip(w)
        .map(|((l, c), x)| l.sqrt() * (x - c))
        .collect();
    let sigma = problem.noise_sd();
    let n_chunks = n_samples.div_ceil(MC_CHUNK);

    let chunks: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let len = MC_CHUNK.min(n_samples - j * MC_CHUNK);
            let mut m = Moments { n: 0.0, mean: 0.0, m2: 0.0 };
            for _ in 0..len {
                let mut resid = 0.0;
                for s in &scaled {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    resid += s * z;
                }
                let xi: f64 = StandardNormal.sample(&mut rng);
                resid -= sigma * xi;
                let loss = (resid.abs() + b).powi(2);
                m.n += 1.0;
                let delta = loss - m.mean;
                m.mean += delta / m.n;
                m.m2 += delta * (loss - m.mean);
            }
            m
        })
        .collect();

    let total = chunks
        .into_iter()
        .fold(Moments { n: 0.0, mean: 0.0, m2: 0.0 }, Moments::merge);
    let var = total.m2 / (total.n - 1.0);
    Ok(McEstimate { estimate: total.mean, std_error: (var / total.n).sqrt() })
}
