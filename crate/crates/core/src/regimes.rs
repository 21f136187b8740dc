//! Closed-form and asymptotic profiles for structured problem families.
//!
//! Asymptotic `≍` forms are returned with unit constants; compare them with
//! the generic oracle only through declared factor bands.

use serde::Serialize;

use crate::bounds::h_aux;
use crate::error::{invalid, Error, Result};
use crate::risk::c0;

const KNIFE_EDGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Isotropic,
    SparseIsotropic,
    PolyDecay,
    WeakStrong,
    HarmonicLinf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeProfile {
    pub regime: Regime,
    pub eps_fl: f64,
    /// `None` where the regime has no closed form for the optimal regularization.
    pub lambda_opt: Option<f64>,
    pub e_opt: f64,
    pub e_opt_eps: f64,
    /// `eps ≥ eps_fl`.
    pub free_lunch: bool,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("accuracy tolerance must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid(format!("attack strength must be finite and non-negative, got {r}")));
    }
    Ok(())
}

/// `Σ = I`, `S = ‖w_0‖²`: exact closed forms.
pub fn isotropic_profile(s: f64, sigma2: f64, r: f64, eps: f64) -> Result<RegimeProfile> {
    if !(s > 0.0) {
        return Err(invalid("S must be positive"));
    }
    check_r(r)?;
    check_eps(eps)?;
    let r2 = r * r;
    let eps_fl = r2 / (1.0 + r2);
    let e_opt = sigma2 + s * r2 / (1.0 + r2);
    let free_lunch = eps >= eps_fl;
    let (lambda, e_opt_eps) = if free_lunch {
        (r2, e_opt)
    } else {
        (eps / (1.0 - eps), sigma2 + s * (eps * eps + (1.0 - eps).powi(2) * r2))
    };
    Ok(RegimeProfile {
        regime: Regime::Isotropic,
        eps_fl,
        lambda_opt: Some(lambda),
        e_opt,
        e_opt_eps,
        free_lunch,
    })
}

/// `r_0(p) = s^{1/p − 1/2}/√d` for `Σ = I/d` and `s` unit coefficients.
pub fn sparse_r0(d: usize, s: usize, p: f64) -> f64 {
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    (s as f64).powf(inv_p - 0.5) / (d as f64).sqrt()
}

/// `Σ = I/d`, `w_0` with `s` unit coefficients, ℓp attack.
///
/// With `x = r/r_0(p)`, the threshold is `x²/(1 + x²)`: exact for `p = 2`
/// (where `λ_opt = ε/((1 − ε)d)`), the chord value otherwise.
pub fn sparse_isotropic_profile(d: usize, s: usize, p: f64, sigma2: f64, r: f64, eps: f64) -> Result<RegimeProfile> {
    if s == 0 || s > d {
        return Err(invalid(format!("need 1 ≤ s ≤ d, got s = {s}, d = {d}")));
    }
    if !(p >= 1.0) {
        return Err(invalid(format!("norm exponent {p} outside [1, ∞]")));
    }
    check_r(r)?;
    check_eps(eps)?;
    let x = r / sparse_r0(d, s, p);
    let mass = s as f64 / d as f64;
    let eps_fl = x * x / (1.0 + x * x);
    let e_opt = sigma2 + mass * x.min(1.0).powi(2);
    let free_lunch = eps >= eps_fl;
    let e_opt_eps = if free_lunch { e_opt } else { sigma2 + mass * h_aux(x, eps)?.0.powi(2) };
    let lambda_opt = if p == 2.0 {
        Some(if free_lunch { r * r } else { eps / ((1.0 - eps) * d as f64) })
    } else {
        None
    };
    Ok(RegimeProfile { regime: Regime::SparseIsotropic, eps_fl, lambda_opt, e_opt, e_opt_eps, free_lunch })
}

/// Which asymptotic cell a `(β, δ)` pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyCell {
    /// `δ < 1`: accuracy and robustness conflict.
    Tradeoff,
    /// `δ = 1`: logarithmic boundary.
    Critical,
    /// `1 < δ < β + 1`.
    Aligned,
    /// `δ = β + 1`: `G(λ) ≍ λ² log(1/λ)`.
    AlignedLog,
    /// `δ > β + 1`: `G(λ) ≍ λ²`.
    AlignedFlat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolyDecayProfile {
    pub profile: RegimeProfile,
    pub cell: PolyCell,
    pub theta: f64,
    pub phi: f64,
    /// `δ > 1`: the optimum is accurate for every small attack.
    pub phase_free_lunch: bool,
}

/// Root of `λ² log(1/λ) = y` on `(0, e^{-1/2})`, where the map is increasing.
fn inverse_lambda2_log(y: f64) -> f64 {
    let f = |l: f64| l * l * (1.0 / l).ln();
    let (mut lo, mut hi) = (0.0f64, (-0.5f64).exp());
    if y >= f(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `λ_k = k^{-β}`, `c_k² = k^{-δ}`, Euclidean attack; `θ = (1−δ)/β`, `φ = θ/(1−θ)`.
///
/// `G(λ) ≍ λ^{1−θ}` (or `λ² log(1/λ)`, `λ²` past `δ = β + 1`) and
/// `F(r,λ) − G(λ) ≍ r²·{λ^{−θ}, log(1/λ), 1}` for `δ <, =, > 1`.
pub fn polydecay_profile(beta: f64, delta: f64, sigma2: f64, r: f64, eps: f64) -> Result<PolyDecayProfile> {
    if !(beta > 1.0) {
        return Err(invalid(format!("decay exponent β must exceed 1, got {beta}")));
    }
    if !(delta >= 0.0) {
        return Err(invalid(format!("δ must be non-negative, got {delta}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid(format!("asymptotic profile needs 0 < r < 1, got {r}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("asymptotic profile needs 0 < ε ≤ 1, got {eps}")));
    }
    let theta = (1.0 - delta) / beta;
    let phi = theta / (1.0 - theta);
    let cell = if (delta - 1.0).abs() <= KNIFE_EDGE_TOL {
        PolyCell::Critical
    } else if delta < 1.0 {
        PolyCell::Tradeoff
    } else if (delta - beta - 1.0).abs() <= KNIFE_EDGE_TOL {
        PolyCell::AlignedLog
    } else if delta < beta + 1.0 {
        PolyCell::Aligned
    } else {
        PolyCell::AlignedFlat
    };
    let r2 = r * r;
    let (eps_fl, lam, e_opt, e_constrained) = match cell {
        PolyCell::Tradeoff => {
            let lam = eps.powf(2.0 / (1.0 - theta));
            (r.powf(1.0 - theta), lam, sigma2 + r.powf(2.0 * (1.0 - theta)), sigma2 + eps * eps + r2 * eps.powf(-2.0 * phi))
        }
        PolyCell::Critical => (r, eps * eps, sigma2 + r2 * (1.0 / r).ln(), sigma2 + eps * eps + r2 * (1.0 / eps).ln()),
        PolyCell::Aligned => (r.powf(1.0 - theta), eps.powf(2.0 / (1.0 - theta)), sigma2 + r2, sigma2 + eps * eps + r2),
        PolyCell::AlignedLog => (
            r2 * (1.0 / r).ln().sqrt(),
            inverse_lambda2_log(eps * eps),
            sigma2 + r2,
            sigma2 + eps * eps + r2,
        ),
        PolyCell::AlignedFlat => (r2, eps, sigma2 + r2, sigma2 + eps * eps + r2),
    };
    let eps_fl = eps_fl.min(1.0);
    let free_lunch = eps >= eps_fl;
    let (lambda_opt, e_opt_eps) = if free_lunch { (r2, e_opt) } else { (lam.min(r2), e_constrained) };
    Ok(PolyDecayProfile {
        profile: RegimeProfile {
            regime: Regime::PolyDecay,
            eps_fl,
            lambda_opt: Some(lambda_opt),
            e_opt,
            e_opt_eps,
            free_lunch,
        },
        cell,
        theta,
        phi,
        phase_free_lunch: delta > 1.0 + KNIFE_EDGE_TOL,
    })
}

/// Case of the weak/strong optimum, named by the maximizing scale `s = r/(1+λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakStrongBranch {
    /// `s = r`: no shrinkage beyond the attack scale.
    Unshrunk,
    /// `s = b`: shrink onto the weak-feature scale.
    WeakScale,
    /// `s = 1`: shrink onto the strong-feature scale.
    StrongScale,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakStrongProfile {
    pub h0: f64,
    pub eps_star: f64,
    pub below_threshold: bool,
    pub branch: WeakStrongBranch,
    /// `σ² + h0²`.
    pub e_opt_eps: f64,
}

/// Two-level spectrum (`1` on strong, `b²` on weak features) with strong and
/// weak coefficient masses `u`, `v` and `R = u + bv`, Euclidean attack.
///
/// `h0 = sup_{0 < s ≤ r} (r/s)(γ̂(s) − εR) + εR` with `γ̂(s) = min(1,s)u + min(b,s)v`.
/// The objective is monotone in `s` between the breakpoints `{b, 1}`, so the
/// supremum is attained at a breakpoint or at `s = r`.
pub fn weak_strong_profile(u: f64, v: f64, b: f64, sigma2: f64, r: f64, eps: f64) -> Result<WeakStrongProfile> {
    if !(u >= 0.0 && v >= 0.0 && (0.0..=1.0).contains(&b)) {
        return Err(invalid("need u, v ≥ 0 and b ∈ [0, 1]"));
    }
    check_r(r)?;
    if !(eps >= 0.0) {
        return Err(invalid("ε must be non-negative"));
    }
    let big_r = u + b * v;
    if big_r == 0.0 {
        return Err(Error::Divergent("R = u + bv = 0".into()));
    }
    let eps_star = v * b / big_r;
    let gamma_hat = |s: f64| s.min(1.0) * u + s.min(b) * v;
    let value = |s: f64| r / s * (gamma_hat(s) - eps * big_r) + eps * big_r;

    let (mut h0, mut branch) = if r == 0.0 { (0.0, WeakStrongBranch::Unshrunk) } else { (value(r), WeakStrongBranch::Unshrunk) };
    for (s, tag) in [(b, WeakStrongBranch::WeakScale), (1.0, WeakStrongBranch::StrongScale)] {
        if s > 0.0 && s < r {
            let val = value(s);
            if val > h0 * (1.0 + 1e-15) {
                h0 = val;
                branch = tag;
            }
        }
    }
    Ok(WeakStrongProfile {
        h0,
        eps_star,
        below_threshold: eps <= eps_star,
        branch,
        e_opt_eps: sigma2 + h0 * h0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicProfile {
    /// `H_d = ‖w_0‖₁`.
    pub harmonic_number: f64,
    /// `σ² + r² log(1/r)²`.
    pub e_opt_asymptotic: f64,
    /// `σ² + (r log d)²`.
    pub e_w0_asymptotic: f64,
    /// `σ² + r²H_d² + 2√(2/π)·rH_dσ`.
    pub e_w0_exact: f64,
    /// `1/√d ≤ r ≤ 1`; outside it the asymptotics are not claimed.
    pub in_window: bool,
}

/// `Σ = I`, `(w_0)_k = 1/k`, ℓ∞ attack.
pub fn harmonic_linf_profile(d: usize, sigma2: f64, r: f64) -> Result<HarmonicProfile> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(sigma2 >= 0.0) {
        return Err(invalid("σ² must be non-negative"));
    }
    check_r(r)?;
    let h: f64 = (1..=d).rev().map(|k| 1.0 / k as f64).sum();
    let sigma = sigma2.sqrt();
    let df = d as f64;
    let log_inv_r = if r > 0.0 { (1.0 / r).ln() } else { 0.0 };
    Ok(HarmonicProfile {
        harmonic_number: h,
        e_opt_asymptotic: sigma2 + (r * log_inv_r).powi(2),
        e_w0_asymptotic: sigma2 + (r * df.ln()).powi(2),
        e_w0_exact: sigma2 + r * r * h * h + 2.0 * c0() * r * h * sigma,
        in_window: r >= 1.0 / df.sqrt() && r <= 1.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractureSum {
    /// Head `k ≤ k_max` summed directly, tail by its integral expansion.
    pub exact_sum: f64,
    /// `D^{−c}`, times `log D` on the boundary `m = n − 1/β`.
    pub asymptotic_estimate: f64,
    pub c_exponent: f64,
    pub log_flag: bool,
    /// Tail contribution beyond `k_max`.
    pub tail: f64,
}

pub const DEFAULT_K_MAX: usize = 1_000_000;

/// `Σ_k λ_k^n/(1 + Dλ_k)^m` with `λ_k = k^{−β}`.
pub fn fracture_sum(beta: f64, n_exp: f64, m_exp: f64, big_d: f64, k_max: usize) -> Result<FractureSum> {
    if !(beta > 0.0 && n_exp * beta > 1.0) {
        return Err(Error::Divergent(format!("nβ = {} ≤ 1: the series diverges", n_exp * beta)));
    }
    if !(big_d > 0.0 && m_exp >= 0.0 && k_max >= 1) {
        return Err(invalid("need D > 0, m ≥ 0 and k_max ≥ 1"));
    }
    let term = |k: f64| {
        let l = k.powf(-beta);
        l.powf(n_exp) / (1.0 + big_d * l).powf(m_exp)
    };
    // Smallest terms first.
    let head: f64 = (1..=k_max).rev().map(|k| term(k as f64)).sum();

    // ∫_{K+½}^∞ u^{−nβ}(1 + D u^{−β})^{−m} du, expanded binomially in x = D u^{−β}.
    let start = k_max as f64 + 0.5;
    let x0 = big_d * start.powf(-beta);
    if x0 >= 0.5 {
        return Err(invalid(format!("k_max = {k_max} too small for D = {big_d}: tail expansion does not converge")));
    }
    let mut tail = 0.0;
    let mut binom = 1.0;
    for j in 0..200 {
        let e = (n_exp + j as f64) * beta - 1.0;
        let t = binom * big_d.powi(j) * start.powf(-e) / e;
        tail += t;
        if t.abs() <= 1e-18 * tail.abs() {
            break;
        }
        binom *= -(m_exp + j as f64) / (j as f64 + 1.0);
    }
    // Midpoint-rule error of the tail integral is at most sup|f'|/24 past k_max.
    let tail_err = (n_exp + m_exp) * beta * start.powf(-n_exp * beta - 1.0) / 24.0;
    if tail_err > 1e-10 * head {
        return Err(invalid(format!("k_max = {k_max} too small: tail error exceeds 1e-10 of the head")));
    }
    let c = m_exp.min(n_exp - 1.0 / beta);
    let log_flag = (m_exp - (n_exp - 1.0 / beta)).abs() <= KNIFE_EDGE_TOL;
    let mut asym = big_d.powf(-c);
    if log_flag {
        asym *= big_d.ln();
    }
    Ok(FractureSum { exact_sum: head + tail, asymptotic_estimate: asym, c_exponent: c, log_flag, tail })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_inverse_round_trips() {
        for y in [1e-8, 1e-4, 1e-2] {
            let l = inverse_lambda2_log(y);
            assert!((l * l * (1.0 / l).ln() - y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn poly_cells_dispatch_on_knife_edges() {
        let cell = |delta| polydecay_profile(2.0, delta, 0.0, 0.01, 0.3).unwrap().cell;
        assert_eq!(cell(0.0), PolyCell::Tradeoff);
        assert_eq!(cell(1.0), PolyCell::Critical);
        assert_eq!(cell(2.0), PolyCell::Aligned);
        assert_eq!(cell(3.0), PolyCell::AlignedLog);
        assert_eq!(cell(4.0), PolyCell::AlignedFlat);
        assert!(polydecay_profile(1.0, 0.0, 0.0, 0.01, 0.3).is_err());
    }
}
