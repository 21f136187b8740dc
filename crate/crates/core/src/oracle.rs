//! The proximal family `w^prox(λ) = argmin ‖w − w_0‖_Σ² + λ‖w‖_⋆²` and the
//! optimal tradeoffs it traces.
//!
//! Along `λ ∈ [0, r²]` the curves `G(λ) = ‖w^prox − w_0‖_Σ²` (non-decreasing)
//! and `F(r,λ) = G(λ) + r²‖w^prox‖_⋆²` (non-increasing) parametrize the
//! Pareto front between standard risk and the proxy adversarial risk `Ē`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problem::{lp_norm, sigma_dist_sq, AttackNorm, Exponent, ModelVector, ProblemSpec};
use crate::risk::adversarial_risk;

const BISECT_MAX_ITER: usize = 200;
const BISECT_REL_TOL: f64 = 1e-12;
const FIRST_ORDER_MAX_ITER: usize = 200_000;
const FIRST_ORDER_TOL: f64 = 1e-12;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!("regularization must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

fn check_r_eps(r: f64, eps: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid(format!("attack strength must be finite and non-negative, got {r}")));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("accuracy tolerance must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

/// Minimizer of `‖w − w_0‖_Σ² + λ‖w‖_⋆²`.
pub fn w_prox(problem: &ProblemSpec, norm: &AttackNorm, lambda: f64) -> Result<ModelVector> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(problem.w0());
    }
    match norm {
        AttackNorm::Lp(Exponent::Finite(p)) if *p == 2.0 => Ok(prox_euclidean(problem, lambda)),
        AttackNorm::Lp(Exponent::Infinity) => Ok(prox_l1_dual(problem, lambda)),
        AttackNorm::Lp(Exponent::Finite(p)) if *p == 1.0 => prox_linf_dual(problem, lambda),
        AttackNorm::Lp(Exponent::Finite(p)) => prox_lq_dual(problem, *p / (*p - 1.0), lambda),
        AttackNorm::Mahalanobis(m) => {
            if m.dim() != problem.dim() {
                return Err(Error::DimensionMismatch { expected: problem.dim(), found: m.dim() });
            }
            prox_mahalanobis(problem, &m.inverse(), lambda)
        }
    }
}

/// `w_k = λ_k c_k / (λ_k + λ)`.
fn prox_euclidean(problem: &ProblemSpec, lambda: f64) -> ModelVector {
    problem
        .eigenvalues()
        .iter()
        .zip(problem.coeffs())
        .map(|(l, c)| l * c / (l + lambda))
        .collect::<Vec<_>>()
        .into()
}

/// `(Σ + λB⁻¹)⁻¹ Σ w_0`.
fn prox_mahalanobis(problem: &ProblemSpec, b_inv: &DMatrix<f64>, lambda: f64) -> Result<ModelVector> {
    let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(problem.eigenvalues()));
    let a = &sigma + b_inv * lambda;
    let rhs = DVector::from_iterator(
        problem.dim(),
        problem.eigenvalues().iter().zip(problem.coeffs()).map(|(l, c)| l * c),
    );
    let chol = a.cholesky().ok_or_else(|| invalid("Σ + λB⁻¹ is not positive definite"))?;
    Ok(chol.solve(&rhs).as_slice().to_vec().into())
}

/// ℓ∞ attack. First-order conditions give `λ_k w_k = ST(μ_k; t)` with
/// `μ_k = λ_k c_k` and `t = λ‖w‖₁`; `t ↦ t − λ‖w(t)‖₁` is strictly increasing
/// on `[0, ‖μ‖_∞]`.
fn prox_l1_dual(problem: &ProblemSpec, lambda: f64) -> ModelVector {
    let eig = problem.eigenvalues();
    let mu: Vec<f64> = eig.iter().zip(problem.coeffs()).map(|(l, c)| l * c).collect();
    let l1_at = |t: f64| -> f64 {
        mu.iter().zip(eig).map(|(m, l)| (m.abs() - t).max(0.0) / l).sum()
    };
    let (mut lo, mut hi) = (0.0, mu.iter().fold(0.0f64, |a, m| a.max(m.abs())));
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid - lambda * l1_at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    // On the bracketed active set the fixed point is linear in t; solve it exactly.
    let (mut a, mut b) = (0.0, 0.0);
    for (m, l) in mu.iter().zip(eig) {
        if m.abs() > t {
            a += m.abs() / l;
            b += 1.0 / l;
        }
    }
    let exact = lambda * a / (1.0 + lambda * b);
    if (exact - t).abs() <= 1e-6 * t.max(f64::MIN_POSITIVE) {
        t = exact;
    }
    mu.iter()
        .zip(eig)
        .map(|(m, l)| m.signum() * (m.abs() - t).max(0.0) / l)
        .collect::<Vec<_>>()
        .into()
}

fn smooth_part(problem: &ProblemSpec, w: &[f64]) -> f64 {
    sigma_dist_sq(problem, w)
}

fn smooth_grad(problem: &ProblemSpec, w: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = 2.0 * problem.eigenvalues()[k] * (w[k] - problem.coeffs()[k]);
    }
}

/// `argmin_w ½‖w − v‖² + α‖w‖_∞²`: clip at level `m` with `Σ(|v_k| − m)_+ = 2αm`.
fn prox_sq_linf(v: &[f64], alpha: f64) -> Vec<f64> {
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    let mut m = 0.0;
    let mut s = 0.0;
    for j in 0..a.len() {
        s += a[j];
        let cand = s / (j as f64 + 1.0 + 2.0 * alpha);
        let next = a.get(j + 1).copied().unwrap_or(0.0);
        if cand >= next && cand <= a[j] {
            m = cand;
            break;
        }
    }
    v.iter().map(|x| x.signum() * x.abs().min(m)).collect()
}

/// ℓ1 attack (dual ℓ∞): FISTA on the Σ-quadratic with the exact prox of
/// `λ‖·‖_∞²`, adaptive restart, step `1/L` with `L = 2λ_1`.
fn prox_linf_dual(problem: &ProblemSpec, lambda: f64) -> Result<ModelVector> {
    let d = problem.dim();
    let lip = 2.0 * problem.eigenvalues()[0];
    let alpha = lambda / lip;
    let objective = |w: &[f64]| smooth_part(problem, w) + lambda * lp_norm(w, Exponent::Infinity).powi(2);
    let step_from = |y: &[f64], g: &mut [f64]| -> Vec<f64> {
        smooth_grad(problem, y, g);
        let v: Vec<f64> = y.iter().zip(g.iter()).map(|(yi, gi)| yi - gi / lip).collect();
        prox_sq_linf(&v, alpha)
    };
    let mut g = vec![0.0; d];
    let mut x = prox_euclidean(problem, lambda).into_inner();
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut f_prev = objective(&x);
    for _ in 0..FIRST_ORDER_MAX_ITER {
        let x_new = step_from(&y, &mut g);
        let f_new = objective(&x_new);
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let step: f64 = x_new.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = 1.0 + lp_norm(&x_new, Exponent::Finite(2.0));
        if f_new > f_prev {
            // Restart momentum from the last accepted iterate.
            y = x.clone();
            theta = 1.0;
            continue;
        }
        let mom = (theta - 1.0) / theta_new;
        y = x_new.iter().zip(&x).map(|(a, b)| a + mom * (a - b)).collect();
        let rel_dec = (f_prev - f_new) / f_new.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        theta = theta_new;
        f_prev = f_new;
        if step <= FIRST_ORDER_TOL * scale && rel_dec <= 1e-9 {
            let mut probe = vec![0.0; d];
            let fixed = step_from(&x, &mut probe);
            let res: f64 = fixed.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if res <= 1e-10 * scale {
                return Ok(x.into());
            }
        }
    }
    Err(Error::NonConvergence { what: "accelerated proximal gradient (dual ℓ∞)", iterations: FIRST_ORDER_MAX_ITER })
}

/// Dual order `q ∈ (1, ∞)`, `q ≠ 2`.
///
/// With `N = ‖w‖_q` the optimality conditions decouple: `w_k = sign(c_k)·u_k`
/// where `λ_k(u_k − |c_k|) + μ u_k^{q−1} = 0` and `μ = λN^{2−q}`. Every root of
/// `ψ(μ) = μ − λ‖u(μ)‖_q^{2−q}` is a stationary point of the strictly convex
/// objective, so the root is unique; `ψ(0) < 0` and `ψ → ∞`, hence bisection.
fn prox_lq_dual(problem: &ProblemSpec, q: f64, lambda: f64) -> Result<ModelVector> {
    let eig = problem.eigenvalues();
    let c = problem.coeffs();
    let qe = Exponent::Finite(q);
    let coords = |mu: f64| -> Vec<f64> {
        eig.iter()
            .zip(c)
            .map(|(&l, &ck)| {
                let a = ck.abs();
                if a == 0.0 {
                    return 0.0;
                }
                // λ_k(u − a) + μu^{q−1} is increasing on [0, a].
                let (mut lo, mut hi) = (0.0f64, a);
                while hi - lo > 4.0 * f64::EPSILON * a {
                    let mid = 0.5 * (lo + hi);
                    if l * (mid - a) + mu * mid.powf(q - 1.0) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                ck.signum() * 0.5 * (lo + hi)
            })
            .collect()
    };
    let psi = |mu: f64| mu - lambda * lp_norm(&coords(mu), qe).powf(2.0 - q);
    let start = lambda * lp_norm(c, qe).powf(2.0 - q);
    let (mut lo, mut hi) = (start, start);
    let mut grow = 0;
    while psi(hi) <= 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 2000 {
            return Err(Error::NonConvergence { what: "ℓq prox bracketing", iterations: grow });
        }
    }
    while lo > f64::MIN_POSITIVE && psi(lo) > 0.0 {
        lo *= 0.5;
        grow += 1;
        if grow > 4000 {
            return Err(Error::NonConvergence { what: "ℓq prox bracketing", iterations: grow });
        }
    }
    if lo == hi {
        lo = 0.5 * hi;
    }
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if psi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(coords(0.5 * (lo + hi)).into())
}

/// `(G(λ), F(r,λ))`.
pub fn gf_values(problem: &ProblemSpec, norm: &AttackNorm, r: f64, lambda: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    check_r_eps(r, 0.0)?;
    if norm.is_euclidean() {
        let (mut g, mut h) = (0.0, 0.0);
        for (l, c) in problem.eigenvalues().iter().zip(problem.coeffs()) {
            let den = (l + lambda) * (l + lambda);
            g += l * c * c / den;
            h += l * l * c * c / den;
        }
        let g = lambda * lambda * g;
        return Ok((g, g + r * r * h));
    }
    let w = w_prox(problem, norm, lambda)?;
    let g = sigma_dist_sq(problem, &w);
    let b = r * norm.dual_unchecked(&w);
    Ok((g, g + b * b))
}

/// `F(r, r²)`, using `r² Σ λ_k c_k²/(λ_k + r²)` for Euclidean attacks.
fn f_at_r2(problem: &ProblemSpec, norm: &AttackNorm, r: f64) -> Result<f64> {
    if norm.is_euclidean() {
        let r2 = r * r;
        return Ok(r2
            * problem
                .eigenvalues()
                .iter()
                .zip(problem.coeffs())
                .map(|(l, c)| l * c * c / (l + r2))
                .sum::<f64>());
    }
    Ok(gf_values(problem, norm, r, r * r)?.1)
}

/// `ε_FL(r) = √G(r²)/‖w_0‖_Σ`, clamped to `[0, 1]` against rounding.
pub fn free_lunch_threshold(problem: &ProblemSpec, norm: &AttackNorm, r: f64) -> Result<f64> {
    check_r_eps(r, 0.0)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let (g, _) = gf_values(problem, norm, r, r * r)?;
    Ok((g / problem.w0_sigma_norm_sq()).sqrt().clamp(0.0, 1.0))
}

/// Solves `G(λ) = ε²‖w_0‖_Σ²` on `[0, r²]` by bisection; `r²` when `ε ≥ ε_FL(r)`.
pub fn lambda_opt(problem: &ProblemSpec, norm: &AttackNorm, r: f64, eps: f64) -> Result<f64> {
    check_r_eps(r, eps)?;
    if r == 0.0 || eps == 0.0 {
        return Ok(0.0);
    }
    let r2 = r * r;
    if eps >= free_lunch_threshold(problem, norm, r)? {
        return Ok(r2);
    }
    let target = eps * eps * problem.w0_sigma_norm_sq();
    let (mut lo, mut hi) = (0.0, r2);
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gf_values(problem, norm, r, mid)?.0 < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Proxy-optimal tradeoff at one `(r, ε)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffProfile {
    pub r: f64,
    pub eps: f64,
    pub eps_fl: f64,
    pub lambda_opt: f64,
    /// `σ² + F(r, r²)`.
    pub e_opt: f64,
    /// `σ² + F(r, λ_opt)`.
    pub e_opt_eps: f64,
    /// Exact adversarial risk of `w_star`; lies in `[e_opt_eps, c₂·e_opt_eps]`.
    pub e_exact_at_w_star: f64,
    pub w_star: ModelVector,
}

pub fn tradeoff_profile(problem: &ProblemSpec, norm: &AttackNorm, r: f64, eps: f64) -> Result<TradeoffProfile> {
    check_r_eps(r, eps)?;
    let s2 = problem.sigma2();
    if r == 0.0 {
        let w0 = problem.w0();
        return Ok(TradeoffProfile {
            r,
            eps,
            eps_fl: 0.0,
            lambda_opt: 0.0,
            e_opt: s2,
            e_opt_eps: s2,
            e_exact_at_w_star: adversarial_risk(problem, norm, &w0, 0.0)?,
            w_star: w0,
        });
    }
    let eps_fl = free_lunch_threshold(problem, norm, r)?;
    let lam = lambda_opt(problem, norm, r, eps)?;
    let e_opt = s2 + f_at_r2(problem, norm, r)?;
    let e_opt_eps = if lam == r * r { e_opt } else { s2 + gf_values(problem, norm, r, lam)?.1 };
    let w_star = w_prox(problem, norm, lam)?;
    Ok(TradeoffProfile {
        r,
        eps,
        eps_fl,
        lambda_opt: lam,
        e_opt,
        e_opt_eps,
        e_exact_at_w_star: adversarial_risk(problem, norm, &w_star, r)?,
        w_star,
    })
}

/// Exact unconstrained optimum `E_opt(r) = min_w E(w, r)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactOptimum {
    /// Path parameter of the minimizer; infinite for the null model.
    pub lambda: f64,
    pub value: f64,
    pub w: ModelVector,
}

const EXACT_GRID: usize = 81;
const GOLDEN_ITER: usize = 100;

/// `E(w,r)` is increasing in both `‖w − w_0‖_Σ` and `‖w‖_⋆`, so its minimizers
/// are Pareto optimal for that pair and lie on the closed prox path
/// `{w^prox(λ) : λ ∈ [0, ∞]}`. The path is scanned on a log grid, then the best
/// cell is refined by golden-section search.
pub fn exact_optimum(problem: &ProblemSpec, norm: &AttackNorm, r: f64) -> Result<ExactOptimum> {
    check_r_eps(r, 0.0)?;
    let w0 = problem.w0();
    if r == 0.0 {
        return Ok(ExactOptimum { lambda: 0.0, value: problem.sigma2(), w: w0 });
    }
    let eval = |log_lam: f64| -> Result<(f64, ModelVector)> {
        let w = w_prox(problem, norm, log_lam.exp())?;
        Ok((adversarial_risk(problem, norm, &w, r)?, w))
    };
    let eig = problem.eigenvalues();
    // Dual and Euclidean norms differ by at most a factor d, hence the padding.
    let pad = (problem.dim() as f64).ln();
    let lo = (eig[eig.len() - 1] * 1e-8).ln() - pad;
    let hi = (eig[0] * 1e8).ln() + pad;
    let grid: Vec<f64> = (0..EXACT_GRID).map(|i| lo + (hi - lo) * i as f64 / (EXACT_GRID - 1) as f64).collect();
    let values = grid.iter().map(|&x| eval(x).map(|v| v.0)).collect::<Result<Vec<f64>>>()?;
    let best = (0..EXACT_GRID).min_by(|&i, &j| values[i].total_cmp(&values[j])).expect("non-empty grid");
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(EXACT_GRID - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (eval(x1)?.0, eval(x2)?.0);
    for _ in 0..GOLDEN_ITER {
        if f1 < f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - phi * (b - a);
            f1 = eval(x1)?.0;
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + phi * (b - a);
            f2 = eval(x2)?.0;
        }
    }
    let x = if f1 < f2 { x1 } else { x2 };
    let (value, w) = eval(x)?;
    let mut out = ExactOptimum { lambda: x.exp(), value, w };
    let at_w0 = adversarial_risk(problem, norm, &w0, r)?;
    if at_w0 < out.value {
        out = ExactOptimum { lambda: 0.0, value: at_w0, w: w0 };
    }
    let null = problem.sigma2() + problem.w0_sigma_norm_sq();
    if null < out.value {
        out = ExactOptimum { lambda: f64::INFINITY, value: null, w: ModelVector::zeros(problem.dim()) };
    }
    Ok(out)
}

/// One point `(σ² + G(λ), σ² + F(r,λ))` of the front.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrontPoint {
    pub lambda: f64,
    pub standard_risk: f64,
    pub proxy_adv_risk: f64,
}

/// Samples `λ = 0` and `n_points − 1` log-spaced values in `[10⁻⁸r², r²]`.
pub fn pareto_front(problem: &ProblemSpec, norm: &AttackNorm, r: f64, n_points: usize) -> Result<Vec<FrontPoint>> {
    check_r_eps(r, 0.0)?;
    if n_points < 2 {
        return Err(invalid("a front needs at least 2 points"));
    }
    let r2 = r * r;
    let m = n_points - 1;
    let lambdas: Vec<f64> = std::iter::once(0.0)
        .chain((0..m).map(|i| {
            if m == 1 {
                r2
            } else {
                r2 * 10f64.powf(-8.0 * (1.0 - i as f64 / (m - 1) as f64))
            }
        }))
        .collect();
    let s2 = problem.sigma2();
    lambdas
        .into_par_iter()
        .map(|lambda| {
            let (g, f) = gf_values(problem, norm, r, lambda)?;
            Ok(FrontPoint { lambda, standard_risk: s2 + g, proxy_adv_risk: s2 + f })
        })
        .collect()
}
