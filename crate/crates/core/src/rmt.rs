//! Marchenko–Pastur law with aspect ratio `γ = d/n` and the proportionate
//! scaling predictions for OLS and adversarial training.
//!
//! `m(t) = ∫ dμ_γ(λ)/(λ + t)` is computed by adaptive quadrature after the
//! substitution `λ = (1 + γ) + 2√γ cos θ`, which removes the square-root edges
//! of the density. The closed form is a fast path validated against it.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MpTransform {
    pub gamma: f64,
    /// `[(1 − √γ)², (1 + √γ)²]`.
    pub support: (f64, f64),
    /// `max(0, 1 − 1/γ)`, carried by `λ = 0`.
    pub atom_mass: f64,
}

impl MpTransform {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(format!("aspect ratio must be positive and finite, got {gamma}")));
        }
        let sg = gamma.sqrt();
        Ok(MpTransform {
            gamma,
            support: ((1.0 - sg).powi(2), (1.0 + sg).powi(2)),
            atom_mass: (1.0 - 1.0 / gamma).max(0.0),
        })
    }

    /// Continuous density `√((b − λ)(λ − a)) / (2πγλ)` on the support.
    pub fn density(&self, lambda: f64) -> f64 {
        let (a, b) = self.support;
        if lambda <= a || lambda >= b {
            return 0.0;
        }
        ((b - lambda) * (lambda - a)).sqrt() / (2.0 * std::f64::consts::PI * self.gamma * lambda)
    }

    /// `∫ f dμ` over the continuous part, as an integral over `θ ∈ [0, π]`.
    pub fn integrate_continuous(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let c = 1.0 + self.gamma;
        let h = 2.0 * self.gamma.sqrt();
        let pref = h * h / (2.0 * std::f64::consts::PI * self.gamma);
        let unit = self.gamma == 1.0;
        let g = |theta: f64| {
            let cs = theta.cos();
            let lambda = c + h * cs;
            // sin²θ/λ; at γ = 1 the hard edge λ = 0 cancels exactly.
            let ratio = if unit { 0.5 * (1.0 - cs) } else { (1.0 - cs) * (1.0 + cs) / lambda };
            pref * ratio * f(lambda.max(0.0))
        };
        adaptive_gk15(&g, 0.0, std::f64::consts::PI, 1e-13)
    }
}

/// `(m(t), m′(t))` with `m′(t) = ∫ dμ/(λ + t)²`, by quadrature plus the atom.
pub fn mp_stieltjes(gamma: f64, t: f64) -> Result<(f64, f64)> {
    let mp = MpTransform::new(gamma)?;
    check_t(&mp, t)?;
    let m = mp.integrate_continuous(|l| 1.0 / (l + t))?;
    let mp2 = mp.integrate_continuous(|l| 1.0 / ((l + t) * (l + t)))?;
    if mp.atom_mass > 0.0 {
        Ok((m + mp.atom_mass / t, mp2 + mp.atom_mass / (t * t)))
    } else {
        Ok((m, mp2))
    }
}

fn check_t(mp: &MpTransform, t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("t must be finite and non-negative, got {t}")));
    }
    if t == 0.0 && mp.gamma >= 1.0 {
        return Err(invalid(format!(
            "m(0) diverges for γ = {} ≥ 1 (mass at or near zero); use t > 0",
            mp.gamma
        )));
    }
    Ok(())
}

/// Closed form of `(m, m′)` from the quadratic `γt·m² + (t + 1 − γ)·m − 1 = 0`
/// (root with `m > 0`); `t = 0` uses `m = 1/(1−γ)`, `m′ = 1/(1−γ)³`.
pub fn mp_stieltjes_closed_form(gamma: f64, t: f64) -> Result<(f64, f64)> {
    let mp = MpTransform::new(gamma)?;
    check_t(&mp, t)?;
    if t == 0.0 {
        let q = 1.0 - gamma;
        return Ok((1.0 / q, 1.0 / (q * q * q)));
    }
    let b = t + 1.0 - gamma;
    let disc = (b * b + 4.0 * gamma * t).sqrt();
    // Rationalized root avoids cancellation when b > 0.
    let m = if b > 0.0 { 2.0 / (b + disc) } else { (disc - b) / (2.0 * gamma * t) };
    // Implicit differentiation: (2γt·m + b)·m′ = −(γm² + m), with m′ = −dm/dt.
    let mprime = (gamma * m * m + m) / (2.0 * gamma * t * m + b);
    Ok((m, mprime))
}

/// `ē(t) = γ(m(t) + t·m′(t))` and the adversarial term `r²·ē(t)`.
pub fn at_lowsnr_asymptotics(gamma: f64, t: f64, r: f64) -> Result<(f64, f64)> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid(format!("attack strength must be finite and non-negative, got {r}")));
    }
    let (m, mp) = mp_stieltjes(gamma, t)?;
    let e_bar = gamma * (m + t * mp);
    Ok((e_bar, r * r * e_bar))
}

/// Limiting `Δ(ŵ_OLS)`: `σ̃²γ/(1 − γ)` below the interpolation threshold,
/// `1 − 1/γ + σ̃²/(γ − 1)` above it.
pub fn ols_asymptotic_excess(gamma: f64, sigma_tilde2: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(format!("aspect ratio must be positive and finite, got {gamma}")));
    }
    if !(sigma_tilde2 >= 0.0) {
        return Err(invalid("σ̃² must be non-negative"));
    }
    if gamma == 1.0 {
        return Err(invalid("γ = 1 is the interpolation threshold where the OLS risk diverges"));
    }
    Ok(if gamma < 1.0 {
        sigma_tilde2 * gamma / (1.0 - gamma)
    } else {
        1.0 - 1.0 / gamma + sigma_tilde2 / (gamma - 1.0)
    })
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
/// Gauss weights on the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7, 15) with bisection of the worst interval.
fn adaptive_gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let mut pieces = vec![{
        let (v, e) = gk15(f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    Err(crate::error::Error::NonConvergence { what: "adaptive Gauss–Kronrod quadrature", iterations: 2000 })
}
