//! Gaussian data sampling and the estimators studied: min-norm OLS, ridge
//! (adversarial training under ℓ2 attacks) and Lasso.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::problem::{ModelVector, ProblemSpec};

/// `n` draws of `(x, y)`, rows in the eigenbasis of Σ.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub responses: DVector<f64>,
    pub seed: u64,
    pub problem: ProblemSpec,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// `Xᵀy/n`.
    pub fn xty_over_n(&self) -> DVector<f64> {
        self.features.tr_mul(&self.responses) / self.n() as f64
    }
}

/// Row `i` draws `x_ik = √λ_k g_ik` then `z_i = σ g_i`, all from one ChaCha stream.
pub fn sample_dataset(problem: &ProblemSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    let d = problem.dim();
    let sqrt_l: Vec<f64> = problem.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::<f64>::zeros(n, d);
    let mut y = DVector::<f64>::zeros(n);
    let sigma = problem.noise_sd();
    for i in 0..n {
        let mut signal = 0.0;
        for k in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            let v = sqrt_l[k] * g;
            x[(i, k)] = v;
            signal += v * problem.coeffs()[k];
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        y[i] = signal + sigma * z;
    }
    Ok(Dataset { features: x, responses: y, seed, problem: problem.clone() })
}

const SVD_REL_CUTOFF: f64 = 1e-10;
/// Gram fast path only when `max(n,d)/min(n,d)` keeps `κ(X) ≲ 18`.
const GRAM_MIN_ASPECT: f64 = 1.25;

/// Minimum-norm least squares `X⁺y`, singular values below `1e-10·σ_max` dropped.
///
/// Clearly tall or wide designs go through a Cholesky solve of the smaller Gram
/// matrix, which is exact there because no singular value is cut; anything the
/// Gram path cannot certify falls back to the SVD.
pub fn ols(dataset: &Dataset) -> Result<ModelVector> {
    let (n, d) = (dataset.n(), dataset.d());
    let aspect = n.max(d) as f64 / n.min(d) as f64;
    if aspect >= GRAM_MIN_ASPECT {
        if let Some(w) = ols_gram(dataset) {
            return Ok(w.as_slice().to_vec().into());
        }
    }
    ols_svd(dataset)
}

fn ols_svd(dataset: &Dataset) -> Result<ModelVector> {
    let svd = dataset.features.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(invalid("design matrix is identically zero"));
    }
    let w = svd
        .solve(&dataset.responses, SVD_REL_CUTOFF * smax)
        .map_err(|e| invalid(format!("pseudo-inverse failed: {e}")))?;
    Ok(w.as_slice().to_vec().into())
}

/// Tall: `XᵀX w = Xᵀy`. Wide: `w = Xᵀα` with `XXᵀ α = y`. `None` when the
/// factor looks ill-conditioned or the refined residual is not at rounding level.
fn ols_gram(dataset: &Dataset) -> Option<DVector<f64>> {
    let x = &dataset.features;
    let tall = x.nrows() >= x.ncols();
    let (g, b) = if tall {
        let xt = x.transpose();
        (&xt * x, &xt * &dataset.responses)
    } else {
        (x * x.transpose(), dataset.responses.clone())
    };
    let chol = g.clone().cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    if !(hi > 0.0 && lo > 1e-4 * hi) {
        return None;
    }
    let mut z = chol.solve(&b);
    let resid = &b - &g * &z;
    z += chol.solve(&resid);
    let resid = &b - &g * &z;
    if resid.norm() > 1e-10 * b.norm().max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(if tall { z } else { x.tr_mul(&z) })
}

/// `(XᵀX/n + tI)⁻¹Xᵀy/n`; adversarial training of strength `s` is `t = s²`.
pub fn ridge_at(dataset: &Dataset, t: f64) -> Result<ModelVector> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("ridge parameter must be finite and non-negative, got {t}")));
    }
    if t == 0.0 {
        return ols(dataset);
    }
    let n = dataset.n() as f64;
    let xt = dataset.features.transpose();
    let mut a = (&xt * &dataset.features) / n;
    for k in 0..dataset.d() {
        a[(k, k)] += t;
    }
    let b = (&xt * &dataset.responses) / n;
    let chol = a.clone().cholesky().ok_or_else(|| invalid("ridge system is not positive definite"))?;
    let mut w = chol.solve(&b);
    // One refinement step keeps the normal-equation residual at rounding level.
    let resid = &b - &a * &w;
    w += chol.solve(&resid);
    Ok(w.as_slice().to_vec().into())
}

const LASSO_MAX_SWEEPS: usize = 100_000;
const LASSO_UPDATE_TOL: f64 = 1e-10;

/// Cyclic coordinate descent on `(1/(2n))‖Xw − y‖² + lam·‖w‖₁`.
pub fn lasso(dataset: &Dataset, lam: f64) -> Result<ModelVector> {
    if !(lam.is_finite() && lam >= 0.0) {
        return Err(invalid(format!("Lasso penalty must be finite and non-negative, got {lam}")));
    }
    let (n, d) = (dataset.n(), dataset.d());
    let nf = n as f64;
    let x = &dataset.features;
    let col_sq: Vec<f64> = (0..d).map(|k| x.column(k).norm_squared() / nf).collect();
    let mut w = vec![0.0; d];
    let mut resid = dataset.responses.clone();
    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_update = 0.0f64;
        for k in 0..d {
            if col_sq[k] == 0.0 {
                continue;
            }
            let col = x.column(k);
            let rho = col.dot(&resid) / nf + col_sq[k] * w[k];
            let new = soft_threshold(rho, lam) / col_sq[k];
            let delta = new - w[k];
            if delta != 0.0 {
                resid.axpy(-delta, &col, 1.0);
                w[k] = new;
                max_update = max_update.max(delta.abs());
            }
        }
        if max_update < LASSO_UPDATE_TOL {
            return Ok(w.into());
        }
    }
    Err(Error::NonConvergence { what: "Lasso coordinate descent", iterations: LASSO_MAX_SWEEPS })
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Largest violation of the Lasso optimality conditions: `|g_k + lam·sign(w_k)|`
/// on the support and `(|g_k| − lam)_+` off it, with `g = Xᵀ(Xw − y)/n`.
pub fn lasso_kkt_violation(dataset: &Dataset, w: &[f64], lam: f64) -> f64 {
    let wv = DVector::from_column_slice(w);
    let resid = &dataset.features * wv - &dataset.responses;
    let g = dataset.features.tr_mul(&resid) / dataset.n() as f64;
    w.iter()
        .zip(g.iter())
        .map(|(wk, gk)| if *wk != 0.0 { (gk + lam * wk.signum()).abs() } else { (gk.abs() - lam).max(0.0) })
        .fold(0.0, f64::max)
}

/// `σ·√(s·ln(e·d/s)/n)` with unit constant.
pub fn lasso_theoretical_lambda(sigma: f64, s: usize, d: usize, n: usize) -> Result<f64> {
    if s == 0 || s > d || n == 0 || !(sigma >= 0.0) {
        return Err(invalid("need σ ≥ 0, 1 ≤ s ≤ d and n ≥ 1"));
    }
    let (s, d) = (s as f64, d as f64);
    Ok(sigma * (s * (std::f64::consts::E * d / s).ln() / n as f64).sqrt())
}
