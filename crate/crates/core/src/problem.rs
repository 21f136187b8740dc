//! Regression problems, attack norms and the elementary norms built on them.
//!
//! Every vector lives in the eigenbasis of the feature covariance Σ, so Σ is
//! carried only as its spectrum `λ_1 ≥ … ≥ λ_d > 0`.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A linear model `w` in the eigenbasis of Σ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelVector(pub Vec<f64>);

impl ModelVector {
    pub fn zeros(d: usize) -> Self {
        ModelVector(vec![0.0; d])
    }

    pub fn scaled(&self, a: f64) -> Self {
        ModelVector(self.0.iter().map(|x| a * x).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ModelVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ModelVector {
    fn from(v: Vec<f64>) -> Self {
        ModelVector(v)
    }
}

/// Gaussian linear model `x ~ N(0, Σ)`, `y = xᵀw_0 + σ·ξ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemSpec {
    eigenvalues: Vec<f64>,
    coeffs: Vec<f64>,
    noise_sd: f64,
}

impl ProblemSpec {
    /// Validates the spectrum (positive, non-increasing), the dimensions and `w_0 ≠ 0`.
    pub fn new(eigenvalues: Vec<f64>, coeffs: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("dimension must be at least 1"));
        }
        if eigenvalues.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                found: coeffs.len(),
            });
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(invalid("eigenvalues must be finite and strictly positive"));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("eigenvalues must be non-increasing"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        if coeffs.iter().all(|c| *c == 0.0) {
            return Err(invalid("w_0 must be nonzero"));
        }
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(invalid("noise_sd must be finite and non-negative"));
        }
        Ok(ProblemSpec { eigenvalues, coeffs, noise_sd })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn sigma2(&self) -> f64 {
        self.noise_sd * self.noise_sd
    }

    pub fn w0(&self) -> ModelVector {
        ModelVector(self.coeffs.clone())
    }

    /// `‖w_0‖_Σ² = Σ λ_k c_k²`.
    pub fn w0_sigma_norm_sq(&self) -> f64 {
        self.eigenvalues.iter().zip(&self.coeffs).map(|(l, c)| l * c * c).sum()
    }

    /// Same spectrum and coefficients with a different noise level.
    pub fn with_noise_sd(&self, noise_sd: f64) -> Result<Self> {
        ProblemSpec::new(self.eigenvalues.clone(), self.coeffs.clone(), noise_sd)
    }

    pub(crate) fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: w.len() });
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: ProblemToml = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        raw.build()
    }

    /// Explicit-array TOML form (generator shorthands are expanded).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plain numeric table always serializes")
    }
}

/// `‖v‖_Σ = √(Σ λ_k v_k²)`.
pub fn sigma_norm(problem: &ProblemSpec, v: &[f64]) -> Result<f64> {
    problem.check_dim(v)?;
    Ok(sigma_norm_sq_unchecked(problem.eigenvalues(), v).sqrt())
}

pub(crate) fn sigma_norm_sq_unchecked(eig: &[f64], v: &[f64]) -> f64 {
    eig.iter().zip(v).map(|(l, x)| l * x * x).sum()
}

/// `‖w − w_0‖_Σ²`.
pub(crate) fn sigma_dist_sq(problem: &ProblemSpec, w: &[f64]) -> f64 {
    problem
        .eigenvalues
        .iter()
        .zip(&problem.coeffs)
        .zip(w)
        .map(|((l, c), x)| l * (x - c) * (x - c))
        .sum()
}

/// Exponent of an ℓp norm; `Infinity` is exact rather than a large float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(invalid(format!("norm exponent {p} outside [1, ∞]")))
        }
    }

    /// Harmonic conjugate `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

/// `‖v‖_p`, scaled by the largest entry to avoid overflow for large `p`.
pub fn lp_norm(v: &[f64], p: Exponent) -> f64 {
    let amax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match p {
        Exponent::Infinity => amax,
        Exponent::Finite(p) if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
        Exponent::Finite(p) if p == 2.0 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        Exponent::Finite(p) => {
            if amax == 0.0 {
                return 0.0;
            }
            let s: f64 = v.iter().map(|x| (x.abs() / amax).powf(p)).sum();
            amax * s.powf(1.0 / p)
        }
    }
}

/// Positive-definite matrix defining `‖δ‖_B = √(δᵀBδ)` in the eigenbasis of Σ.
#[derive(Clone, Debug)]
pub struct Mahalanobis {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for Mahalanobis {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl Mahalanobis {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(invalid("Mahalanobis matrix must be square and non-empty"));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * matrix.abs().max().max(1.0) {
            return Err(invalid("Mahalanobis matrix must be symmetric"));
        }
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| invalid("Mahalanobis matrix must be positive definite"))?;
        Ok(Mahalanobis { matrix, chol })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `√(δᵀBδ)`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        let lt = self.chol.l().transpose() * DVector::from_column_slice(v);
        lt.norm()
    }

    /// `√(wᵀB⁻¹w)`.
    pub fn dual_norm(&self, w: &[f64]) -> f64 {
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&DVector::from_column_slice(w))
            .expect("Cholesky factor has a positive diagonal");
        y.norm()
    }
}

/// Norm bounding the attacker's perturbation `‖δ‖ ≤ r`.
#[derive(Clone, Debug, PartialEq)]
pub enum AttackNorm {
    Lp(Exponent),
    Mahalanobis(Mahalanobis),
}

impl AttackNorm {
    pub fn lp(p: f64) -> Result<Self> {
        Ok(AttackNorm::Lp(Exponent::new(p)?))
    }

    pub fn l2() -> Self {
        AttackNorm::Lp(Exponent::Finite(2.0))
    }

    pub fn linf() -> Self {
        AttackNorm::Lp(Exponent::Infinity)
    }

    pub fn mahalanobis(matrix: DMatrix<f64>) -> Result<Self> {
        Ok(AttackNorm::Mahalanobis(Mahalanobis::new(matrix)?))
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, AttackNorm::Lp(Exponent::Finite(p)) if *p == 2.0)
    }

    /// Dual exponent `q` for ℓp attacks.
    pub fn dual_exponent(&self) -> Option<Exponent> {
        match self {
            AttackNorm::Lp(p) => Some(p.conjugate()),
            AttackNorm::Mahalanobis(_) => None,
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if let AttackNorm::Mahalanobis(m) = self {
            if m.dim() != v.len() {
                return Err(Error::DimensionMismatch { expected: m.dim(), found: v.len() });
            }
        }
        Ok(())
    }

    /// The attacker's norm `‖v‖`.
    pub fn primal_norm(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        Ok(match self {
            AttackNorm::Lp(p) => lp_norm(v, *p),
            AttackNorm::Mahalanobis(m) => m.norm(v),
        })
    }

    pub(crate) fn dual_unchecked(&self, w: &[f64]) -> f64 {
        match self {
            AttackNorm::Lp(p) => lp_norm(w, p.conjugate()),
            AttackNorm::Mahalanobis(m) => m.dual_norm(w),
        }
    }
}

/// `‖w‖_⋆ = sup_{‖δ‖ ≤ 1} δᵀw`.
pub fn dual_norm(norm: &AttackNorm, w: &[f64]) -> Result<f64> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(invalid("vector entries must be finite"));
    }
    norm.check_dim(w)?;
    Ok(norm.dual_unchecked(w))
}

impl fmt::Display for AttackNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackNorm::Lp(Exponent::Infinity) => write!(f, "linf"),
            AttackNorm::Lp(Exponent::Finite(p)) => write!(f, "l{p}"),
            AttackNorm::Mahalanobis(m) => write!(f, "mahalanobis({}x{})", m.dim(), m.dim()),
        }
    }
}

/// Parses `l2`, `linf`, `l1`, `l3.5`, `lp(3)` or `p=3`.
impl FromStr for AttackNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let body = if let Some(x) = t.strip_prefix("lp(").and_then(|x| x.strip_suffix(')')) {
            x.to_string()
        } else if let Some(x) = t.strip_prefix("p=") {
            x.to_string()
        } else if let Some(x) = t.strip_prefix('l') {
            x.to_string()
        } else {
            return Err(invalid(format!("unrecognised norm '{s}'")));
        };
        let p = match body.trim() {
            "inf" | "infinity" | "∞" => f64::INFINITY,
            other => other.parse::<f64>().map_err(|_| invalid(format!("unrecognised norm '{s}'")))?,
        };
        AttackNorm::lp(p)
    }
}

/// Parses a generator shorthand `name(a, b, …)` or a bare `name`.
fn parse_call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    match s.find('(') {
        None => Ok((s.to_string(), Vec::new())),
        Some(i) => {
            let name = s[..i].trim().to_string();
            let inner = s[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Config(format!("missing ')' in '{s}'")))?;
            let args = inner
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad argument in '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((name, args))
        }
    }
}

/// Spectrum generator: `isotropic`, `poly(beta)` (`λ_k = k^{-β}`),
/// `weak_strong(d1, b)` (`λ = 1` on the first `d1` coordinates, `b²` after).
pub fn generate_spectrum(spec: &str, d: usize) -> Result<Vec<f64>> {
    let (name, args) = parse_call(spec)?;
    match (name.as_str(), args.as_slice()) {
        ("isotropic", []) => Ok(vec![1.0; d]),
        ("poly", [beta]) if *beta > 0.0 => Ok((1..=d).map(|k| (k as f64).powf(-beta)).collect()),
        ("weak_strong", [d1, b]) if *d1 >= 0.0 && *b > 0.0 && *b <= 1.0 => {
            let d1 = *d1 as usize;
            Ok((0..d).map(|k| if k < d1 { 1.0 } else { b * b }).collect())
        }
        _ => Err(Error::Config(format!("unrecognised spectrum '{spec}'"))),
    }
}

/// Coefficient generator: `ones`, `sparse(s)` (first `s` ones), `harmonic`
/// (`c_k = 1/k`), `poly(delta)` (`c_k² = k^{-δ}`).
pub fn generate_coeffs(spec: &str, d: usize) -> Result<Vec<f64>> {
    let (name, args) = parse_call(spec)?;
    match (name.as_str(), args.as_slice()) {
        ("ones", []) => Ok(vec![1.0; d]),
        ("sparse", [s]) if *s >= 1.0 && (*s as usize) <= d => {
            let s = *s as usize;
            Ok((0..d).map(|k| if k < s { 1.0 } else { 0.0 }).collect())
        }
        ("harmonic", []) => Ok((1..=d).map(|k| 1.0 / k as f64).collect()),
        ("poly", [delta]) => Ok((1..=d).map(|k| (k as f64).powf(-delta / 2.0)).collect()),
        _ => Err(Error::Config(format!("unrecognised coeffs '{spec}'"))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ArrayOrShorthand {
    Array(Vec<f64>),
    Shorthand(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemToml {
    #[serde(default)]
    d: Option<usize>,
    #[serde(default)]
    eigenvalues: Option<Vec<f64>>,
    #[serde(default)]
    spectrum: Option<String>,
    coeffs: ArrayOrShorthand,
    #[serde(default)]
    noise_sd: f64,
}

impl ProblemToml {
    fn build(self) -> Result<ProblemSpec> {
        let need_d = |what: &str| {
            self.d.ok_or_else(|| Error::Config(format!("'{what}' shorthand requires the 'd' key")))
        };
        let eigenvalues = match (&self.eigenvalues, &self.spectrum) {
            (Some(e), None) => e.clone(),
            (None, Some(s)) => generate_spectrum(s, need_d("spectrum")?)?,
            (None, None) => return Err(Error::Config("one of 'eigenvalues' or 'spectrum' is required".into())),
            (Some(_), Some(_)) => return Err(Error::Config("'eigenvalues' and 'spectrum' are exclusive".into())),
        };
        let coeffs = match &self.coeffs {
            ArrayOrShorthand::Array(c) => c.clone(),
            ArrayOrShorthand::Shorthand(s) => generate_coeffs(s, need_d("coeffs")?)?,
        };
        if let Some(d) = self.d {
            if d != eigenvalues.len() {
                return Err(Error::DimensionMismatch { expected: d, found: eigenvalues.len() });
            }
        }
        ProblemSpec::new(eigenvalues, coeffs, self.noise_sd).map_err(|e| Error::Config(e.to_string()))
    }
}
