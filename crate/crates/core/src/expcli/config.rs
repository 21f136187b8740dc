//! Experiment configuration: TOML on disk, CLI overrides on top, then
//! per-experiment defaults filled in so the effective config is explicit.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::AttackNorm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LassoCurse,
    Overparam,
    OlsVsOpt,
    Polydecay,
    AtPareto,
    BoundsCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::LassoCurse,
        ExperimentKind::Overparam,
        ExperimentKind::OlsVsOpt,
        ExperimentKind::Polydecay,
        ExperimentKind::AtPareto,
        ExperimentKind::BoundsCheck,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::LassoCurse => "lasso_curse",
            ExperimentKind::Overparam => "overparam",
            ExperimentKind::OlsVsOpt => "ols_vs_opt",
            ExperimentKind::Polydecay => "polydecay",
            ExperimentKind::AtPareto => "at_pareto",
            ExperimentKind::BoundsCheck => "bounds_check",
        }
    }

    /// Name of the swept quantity, written to the `sweep_var` column.
    pub fn sweep_var(self) -> &'static str {
        match self {
            ExperimentKind::LassoCurse => "d",
            ExperimentKind::Overparam => "gamma",
            ExperimentKind::OlsVsOpt | ExperimentKind::Polydecay => "r",
            ExperimentKind::AtPareto => "eps",
            ExperimentKind::BoundsCheck => "problem",
        }
    }

    /// Experiments that draw no random data; their replicates are identical.
    pub fn is_deterministic(self) -> bool {
        matches!(self, ExperimentKind::Polydecay)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Every key is optional on disk except `experiment`, which may also come
/// from the command line. `with_defaults` fills the rest per experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    /// Worker threads; not part of the output, so it never changes the CSV.
    pub jobs: Option<usize>,
    pub sweep: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    /// Sample size (`lasso_curse`, `ols_vs_opt`, `at_pareto`).
    pub n: Option<usize>,
    /// Dimension (`overparam`, `ols_vs_opt`, `polydecay`, `at_pareto`).
    pub d: Option<usize>,
    /// Label-noise standard deviation.
    pub sigma: Option<f64>,
    /// Multiplier on the theoretical Lasso penalty.
    pub lam_scale: Option<f64>,
    /// Attack strengths reported per point (`overparam`, `at_pareto`).
    pub r: Option<Vec<f64>>,
    /// Accuracy tolerance (`polydecay`).
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    /// Attacker norms, e.g. `["l2", "linf"]` (`ols_vs_opt`).
    pub norm: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn empty() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: None,
            replicates: None,
            jobs: None,
            sweep: None,
            out: None,
            n: None,
            d: None,
            sigma: None,
            lam_scale: None,
            r: None,
            eps: None,
            beta: None,
            delta: None,
            norm: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.ok_or_else(|| Error::Config("no experiment given".into()))
    }

    /// Fills every key the experiment reads, then validates.
    pub fn with_defaults(mut self) -> Result<Self> {
        let kind = self.kind()?;
        self.seed.get_or_insert(0);
        self.lam_scale.get_or_insert(1.0);
        let reps = if matches!(kind, ExperimentKind::Polydecay | ExperimentKind::BoundsCheck) { 1 } else { 5 };
        self.replicates.get_or_insert(reps);
        match kind {
            ExperimentKind::LassoCurse => {
                self.sweep.get_or_insert_with(|| {
                    let mut v: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
                    v.extend((3..=15).map(|k| 50.0 * k as f64));
                    v
                });
                self.n.get_or_insert(1500);
                self.sigma.get_or_insert(0.1);
            }
            ExperimentKind::Overparam => {
                self.sweep
                    .get_or_insert_with(|| vec![0.1, 0.2, 0.5, 0.8, 0.9, 1.1, 1.25, 2.0, 5.0, 10.0]);
                self.d.get_or_insert(1000);
                self.sigma.get_or_insert(0.1);
                self.r.get_or_insert_with(|| vec![0.0, 0.1, 0.5, 1.0]);
            }
            ExperimentKind::OlsVsOpt => {
                self.sweep.get_or_insert_with(|| vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0]);
                self.n.get_or_insert(200);
                self.d.get_or_insert(20);
                self.sigma.get_or_insert(0.1);
                self.norm.get_or_insert_with(|| vec!["l2".into(), "linf".into()]);
            }
            ExperimentKind::Polydecay => {
                self.sweep.get_or_insert_with(|| vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1]);
                self.d.get_or_insert(10_000);
                self.sigma.get_or_insert(0.0);
                self.eps.get_or_insert(0.3);
                self.beta.get_or_insert(2.0);
                self.delta.get_or_insert(0.5);
            }
            ExperimentKind::AtPareto => {
                self.sweep.get_or_insert_with(|| vec![0.1, 0.2, 0.3, 0.4, 0.5]);
                self.n.get_or_insert(10_000);
                self.d.get_or_insert(50);
                self.sigma.get_or_insert(1.0);
                self.r.get_or_insert_with(|| vec![1.0]);
            }
            ExperimentKind::BoundsCheck => {
                self.sweep.get_or_insert_with(|| (0..100).map(f64::from).collect());
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let bad = |msg: String| Err(Error::Config(msg));
        let sweep = self.sweep.as_deref().unwrap_or(&[]);
        if sweep.is_empty() {
            return bad("sweep must be non-empty".into());
        }
        if sweep.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if self.replicates == Some(0) {
            return bad("replicates must be at least 1".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if let Some(s) = self.sigma {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("sigma must be finite and non-negative, got {s}"));
            }
        }
        if let Some(l) = self.lam_scale {
            if !(l.is_finite() && l >= 0.0) {
                return bad(format!("lam_scale must be finite and non-negative, got {l}"));
            }
        }
        if let Some(rs) = &self.r {
            if rs.is_empty() || rs.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return bad("r must be a non-empty list of finite non-negative values".into());
            }
        }
        if self.n == Some(0) || self.d == Some(0) {
            return bad("n and d must be positive".into());
        }
        if let Some(norms) = &self.norm {
            if norms.is_empty() {
                return bad("norm list must be non-empty".into());
            }
            for s in norms {
                s.parse::<AttackNorm>().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        let all = |pred: &dyn Fn(f64) -> bool, what: &str| -> Result<()> {
            if sweep.iter().all(|v| pred(*v)) {
                Ok(())
            } else {
                Err(Error::Config(format!("{kind} sweep values must be {what}")))
            }
        };
        match kind {
            ExperimentKind::LassoCurse => all(&|v| v >= 1.0 && v.fract() == 0.0, "positive integers (dimensions)")?,
            ExperimentKind::Overparam => {
                all(&|v| v > 0.0, "positive aspect ratios")?;
                let d = self.d.unwrap_or(1) as f64;
                all(&|v| (d / v).round() >= 1.0, "aspect ratios leaving at least one sample")?;
            }
            ExperimentKind::OlsVsOpt => all(&|v| v >= 0.0, "non-negative attack strengths")?,
            ExperimentKind::Polydecay => {
                all(&|v| v > 0.0 && v < 1.0, "attack strengths in (0, 1)")?;
                let eps = self.eps.unwrap_or(f64::NAN);
                if !(eps > 0.0 && eps <= 1.0) {
                    return bad(format!("eps must lie in (0, 1], got {eps}"));
                }
                if !(self.beta.unwrap_or(f64::NAN) > 1.0) {
                    return bad("beta must exceed 1".into());
                }
                if !(self.delta.unwrap_or(f64::NAN) >= 0.0) {
                    return bad("delta must be non-negative".into());
                }
            }
            ExperimentKind::AtPareto => all(&|v| (0.0..1.0).contains(&v), "tolerances in [0, 1)")?,
            ExperimentKind::BoundsCheck => all(&|v| v >= 0.0 && v.fract() == 0.0, "non-negative integers")?,
        }
        Ok(())
    }

    pub(crate) fn sweep_values(&self) -> &[f64] {
        self.sweep.as_deref().unwrap_or(&[])
    }

    pub(crate) fn seed_value(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub(crate) fn replicate_count(&self) -> usize {
        self.replicates.unwrap_or(1)
    }
}
