//! Condition numbers, the `H`/`T` auxiliary functions, two-sided order
//! brackets for the constrained optimum, the chord optimum, and the
//! K-functional `γ(r) = min_w ‖w − w_0‖_Σ + r‖w‖₂`.
//!
//! Brackets carry no hidden absolute constants: they hold up to universal
//! factors and are reported as order-of-magnitude brackets.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::oracle::gf_values;
use crate::problem::{AttackNorm, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionNumbers {
    /// `‖w_0‖_Σ / ‖w_0‖_⋆`.
    pub r0: f64,
    /// `‖Σw_0‖ / ‖w_0‖_Σ`, with the attacker's primal norm in the numerator.
    pub r1: f64,
    /// `r1 / r0 ≥ 1`.
    pub eta0: f64,
}

pub fn condition_numbers(problem: &ProblemSpec, norm: &AttackNorm) -> Result<ConditionNumbers> {
    let w0 = problem.w0();
    let s = problem.w0_sigma_norm_sq().sqrt();
    if s == 0.0 {
        return Err(Error::Divergent("‖w_0‖_Σ = 0".into()));
    }
    let sigma_w0: Vec<f64> = problem.eigenvalues().iter().zip(problem.coeffs()).map(|(l, c)| l * c).collect();
    let r0 = s / crate::problem::dual_norm(norm, &w0)?;
    let r1 = norm.primal_norm(&sigma_w0)? / s;
    Ok(ConditionNumbers { r0, r1, eta0: r1 / r0 })
}

/// `H(r,ε) = inf_{|t−1| ≤ ε} |t − 1| + r|t|` and its minimizer `T(r,ε)`.
pub fn h_aux(r_scaled: f64, eps: f64) -> Result<(f64, f64)> {
    if !(r_scaled >= 0.0 && eps >= 0.0) {
        return Err(invalid("h_aux needs non-negative arguments"));
    }
    let delta = eps.min(1.0);
    Ok(if r_scaled < 1.0 { (r_scaled, 1.0) } else { (delta + (1.0 - delta) * r_scaled, 1.0 - delta) })
}

fn h_only(r_scaled: f64, eps: f64) -> f64 {
    h_aux(r_scaled, eps).map(|(h, _)| h).unwrap_or(f64::NAN)
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

/// Order bracket `σ² + ‖w_0‖_Σ² H(r/r1, ε)² ≾ E_opt(r,ε) ≾ σ² + ‖w_0‖_Σ² H(r/r0, ε)²`.
pub fn two_sided_bounds(problem: &ProblemSpec, norm: &AttackNorm, r: f64, eps: f64) -> Result<(f64, f64)> {
    check_r_eps(r, eps)?;
    let cn = condition_numbers(problem, norm)?;
    let s = problem.w0_sigma_norm_sq();
    let s2 = problem.sigma2();
    let lower = s2 + s * h_only(r / cn.r1, eps).powi(2);
    let upper = s2 + s * h_only(r / cn.r0, eps).powi(2);
    Ok((lower, upper.max(lower)))
}

/// Optimum of `σ² + K(t·w_0, r)²` over the chord `|t − 1| ≤ ε`, with its `t`.
pub fn e_shrink(problem: &ProblemSpec, norm: &AttackNorm, r: f64, eps: f64) -> Result<(f64, f64)> {
    if !(r.is_finite() && r >= 0.0 && eps >= 0.0) {
        return Err(invalid("e_shrink needs non-negative r and ε"));
    }
    let cn = condition_numbers(problem, norm)?;
    let (h, t) = h_aux(r / cn.r0, eps)?;
    let k = problem.w0_sigma_norm_sq().sqrt() * h;
    Ok((problem.sigma2() + k * k, t))
}

/// Spectral bracket and path value of `γ(r)` for Euclidean attacks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaBounds {
    /// `√(Σ min(r², λ_k) c_k²) ≤ γ(r)`.
    pub spectral_lo: f64,
    /// `√2 · spectral_lo ≥ γ(r)`.
    pub spectral_hi: f64,
    /// `γ(r)` minimized along the ridge path.
    pub numeric: f64,
    /// `√F(r, r²) ≤ γ(r)`.
    pub proxy_lo: f64,
    /// `√(2F(r, r²)) ≥ γ(r)`.
    pub proxy_hi: f64,
}

/// `K`-minimizers are Pareto optimal for `(‖w − w_0‖_Σ, ‖w‖₂)`, hence lie on the
/// ridge path `w^prox(μ)`, along which `a + r·b` is unimodal in `μ`.
pub fn gamma_bounds(problem: &ProblemSpec, norm: &AttackNorm, r: f64) -> Result<GammaBounds> {
    if !norm.is_euclidean() {
        return Err(Error::UnsupportedNorm(format!("γ(r) bounds need a Euclidean attack, got {norm}")));
    }
    check_r_eps(r, 0.0)?;
    let eig = problem.eigenvalues();
    let c = problem.coeffs();
    let r2 = r * r;
    let lo: f64 = eig.iter().zip(c).map(|(l, ck)| l.min(r2) * ck * ck).sum::<f64>().sqrt();
    let f_r2 = gf_values(problem, norm, r, r2)?.1;

    let k_at = |mu: f64| -> f64 {
        let (mut a, mut b) = (0.0, 0.0);
        for (l, ck) in eig.iter().zip(c) {
            let den = l + mu;
            a += l * ck * ck * (mu / den).powi(2);
            b += (l * ck / den).powi(2);
        }
        a.sqrt() + r * b.sqrt()
    };
    let k_ends = (r * problem.w0().iter().map(|x| x * x).sum::<f64>().sqrt()).min(problem.w0_sigma_norm_sq().sqrt());
    let numeric = if r == 0.0 {
        0.0
    } else {
        let (mut a, mut b) = ((eig[eig.len() - 1] * 1e-12).ln(), (eig[0] * 1e12).ln());
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
        let (mut f1, mut f2) = (k_at(x1.exp()), k_at(x2.exp()));
        for _ in 0..200 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = k_at(x1.exp());
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = k_at(x2.exp());
            }
        }
        f1.min(f2).min(k_ends)
    };
    Ok(GammaBounds {
        spectral_lo: lo,
        spectral_hi: std::f64::consts::SQRT_2 * lo,
        numeric,
        proxy_lo: f_r2.sqrt(),
        proxy_hi: (2.0 * f_r2).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_branches() {
        assert_eq!(h_aux(0.5, 0.9).unwrap(), (0.5, 1.0));
        assert_eq!(h_aux(2.0, 0.25).unwrap(), (1.75, 0.75));
        assert_eq!(h_aux(3.0, 1.5).unwrap(), (1.0, 0.0));
        assert!(h_aux(-1.0, 0.1).is_err());
    }

    #[test]
    fn gamma_needs_euclidean() {
        let p = ProblemSpec::new(vec![1.0], vec![1.0], 0.0).unwrap();
        assert!(matches!(gamma_bounds(&p, &AttackNorm::linf(), 1.0), Err(Error::UnsupportedNorm(_))));
    }
}
