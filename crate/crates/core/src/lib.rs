//! Adversarial risk of linear regression under norm-bounded input attacks.
//!
//! Vectors are expressed in the eigenbasis of the feature covariance Σ. The
//! crate covers exact and proxy risks ([`risk`]), the proximal family that
//! traces optimal accuracy/robustness tradeoffs ([`oracle`]), two-sided order
//! brackets ([`bounds`]), closed-form regime profiles ([`regimes`]), the
//! estimators ([`estimators`]), Marchenko–Pastur asymptotics ([`rmt`]) and the
//! experiment harness behind the `robustlin` binary ([`expcli`]).

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod expcli;
pub mod oracle;
pub mod problem;
pub mod regimes;
pub mod risk;
pub mod rmt;

pub use error::{Error, Result};
pub use problem::{dual_norm, sigma_norm, AttackNorm, Exponent, ModelVector, ProblemSpec};
