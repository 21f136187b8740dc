//! Experiment bodies. Every point is a pure function of `(config, sweep value,
//! replicate)`, so rows are identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{Row, Status};
use crate::bounds::{e_shrink, gamma_bounds, two_sided_bounds};
use crate::error::{Error, Result};
use crate::estimators::{lasso, lasso_theoretical_lambda, ols, ridge_at, sample_dataset};
use crate::oracle::{exact_optimum, lambda_opt, tradeoff_profile};
use crate::problem::{AttackNorm, ProblemSpec};
use crate::regimes::polydecay_profile;
use crate::risk::{adversarial_risk, c1, c2, excess_risk, proxy_risks, standard_risk};
use crate::rmt::{at_lowsnr_asymptotics, ols_asymptotic_excess};

/// SplitMix64 finalizer: a bijection on `u64` with full avalanche.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `i`; depends only on `(seed, i)`, so adding replicates
/// never changes earlier rows.
pub fn replicate_seed(seed: u64, i: usize) -> u64 {
    splitmix64(seed.wrapping_add(i as u64))
}

/// Seed of one `(sweep value, replicate)` point.
pub fn point_seed(seed: u64, i: usize, sweep_value: f64) -> u64 {
    splitmix64(replicate_seed(seed, i) ^ sweep_value.to_bits())
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    /// One entry per failed metric or violated check.
    pub warnings: Vec<String>,
}

/// Runs every `(sweep value, replicate)` point on the worker pool and returns
/// rows in sweep-major, replicate-minor order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cfg = config.clone().with_defaults()?;
    let kind = cfg.kind()?;
    let tasks: Vec<(f64, usize)> = cfg
        .sweep_values()
        .iter()
        .flat_map(|&v| (0..cfg.replicate_count()).map(move |i| (v, i)))
        .collect();
    let work = || -> Vec<Point> { tasks.par_iter().map(|&(v, i)| run_point(&cfg, kind, v, i)).collect() };
    let points = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut out = ExperimentOutput { rows: Vec::new(), warnings: Vec::new() };
    for p in points {
        out.rows.extend(p.rows);
        out.warnings.extend(p.warnings);
    }
    Ok(out)
}

/// Rows of one point plus the shared columns they carry.
struct Point {
    base: Row,
    rows: Vec<Row>,
    warnings: Vec<String>,
}

/// Checks with slack below this count as violated; absorbs rounding only.
const CHECK_TOL: f64 = -1e-9;

impl Point {
    fn push(&mut self, r: Option<f64>, name: &str, value: f64, status: Status) {
        let mut row = self.base.clone();
        row.r = r.or(row.r);
        row.metric_name = name.to_string();
        row.metric_value = value;
        row.status = status;
        self.rows.push(row);
    }

    /// Records a metric; a failed computation becomes a NaN row with status `failed`.
    fn metric(&mut self, r: Option<f64>, name: &str, value: Result<f64>) {
        match value {
            Ok(v) => self.push(r, name, v, Status::Ok),
            Err(e) => {
                self.warn(format!("{name}: {e}"));
                self.push(r, name, f64::NAN, Status::Failed);
            }
        }
    }

    /// Records the slack of an inequality that must be non-negative.
    fn check(&mut self, name: &str, slack: Result<f64>) {
        match slack {
            Ok(s) if s >= CHECK_TOL => self.push(None, name, s, Status::Ok),
            Ok(s) => {
                self.warn(format!("{name} violated, slack {s}"));
                self.push(None, name, s, Status::Violated);
            }
            Err(e) => {
                self.warn(format!("{name}: {e}"));
                self.push(None, name, f64::NAN, Status::Failed);
            }
        }
    }

    fn warn(&mut self, msg: String) {
        let b = &self.base;
        self.warnings
            .push(format!("{} {}={} replicate {}: {msg}", b.experiment, b.sweep_var, b.sweep_value, b.replicate));
    }
}

fn run_point(cfg: &ExperimentConfig, kind: ExperimentKind, value: f64, rep: usize) -> Point {
    let seed = point_seed(cfg.seed_value(), rep, value);
    let mut p = Point {
        base: Row {
            experiment: kind.tag().to_string(),
            sweep_var: kind.sweep_var().to_string(),
            sweep_value: value,
            replicate: rep,
            seed,
            n: None,
            d: None,
            s: None,
            r: None,
            eps: None,
            metric_name: String::new(),
            metric_value: f64::NAN,
            status: Status::Ok,
        },
        rows: Vec::new(),
        warnings: Vec::new(),
    };
    let result = match kind {
        ExperimentKind::LassoCurse => lasso_curse(cfg, value, seed, &mut p),
        ExperimentKind::Overparam => overparam(cfg, value, seed, &mut p),
        ExperimentKind::OlsVsOpt => ols_vs_opt(cfg, value, rep, &mut p),
        ExperimentKind::Polydecay => polydecay(cfg, value, &mut p),
        ExperimentKind::AtPareto => at_pareto(cfg, value, seed, &mut p),
        ExperimentKind::BoundsCheck => bounds_check(value, seed, &mut p),
    };
    if let Err(e) = result {
        p.warn(format!("setup failed: {e}"));
        p.push(None, "point", f64::NAN, Status::Failed);
    }
    p
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// `Σ = I` with `w_0` drawn uniformly on the unit sphere.
fn isotropic_problem(d: usize, sigma: f64, seed: u64) -> Result<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w0 = gaussian_vec(&mut rng, d);
    let norm = w0.iter().map(|x| x * x).sum::<f64>().sqrt();
    w0.iter_mut().for_each(|x| *x /= norm);
    ProblemSpec::new(vec![1.0; d], w0, sigma)
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::Divergent(format!("ratio with non-positive denominator {den}")))
    }
}

/// Lower end of the order bracket with its constant made explicit: the chord
/// argument gives `E_opt(r,ε) ≥ σ² + ½‖w_0‖_Σ² H(r/r1, ε)²`.
fn rigorous_lower(problem: &ProblemSpec, norm: &AttackNorm, r: f64, eps: f64) -> Result<f64> {
    let (lower, _) = two_sided_bounds(problem, norm, r, eps)?;
    let s2 = problem.sigma2();
    Ok(s2 + 0.5 * (lower - s2))
}

/// Sparse `w_0` (first `⌊√d⌋` coordinates Gaussian), `Σ = I`, ℓ∞ attack of
/// strength `√(ln d / s)`, Lasso at the theoretical penalty.
fn lasso_curse(cfg: &ExperimentConfig, value: f64, seed: u64, p: &mut Point) -> Result<()> {
    let d = value as usize;
    let n = cfg.n.unwrap_or(1500);
    let sigma = cfg.sigma.unwrap_or(0.1);
    let s = ((d as f64).sqrt().floor() as usize).max(1);
    let r = ((d as f64).ln() / s as f64).sqrt();
    p.base.n = Some(n);
    p.base.d = Some(d);
    p.base.s = Some(s);
    p.base.r = Some(r);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w0 = gaussian_vec(&mut rng, d);
    w0[s..].iter_mut().for_each(|x| *x = 0.0);
    let problem = ProblemSpec::new(vec![1.0; d], w0, sigma)?;
    let norm = AttackNorm::linf();
    let data = sample_dataset(&problem, n, splitmix64(seed))?;
    let lam = cfg.lam_scale.unwrap_or(1.0) * lasso_theoretical_lambda(sigma, s, d, n)?;
    p.metric(None, "lambda", Ok(lam));

    let w = lasso(&data, lam);
    let opt = exact_optimum(&problem, &norm, r);
    let e_lasso = w.as_ref().map_err(Clone::clone).and_then(|w| adversarial_risk(&problem, &norm, w, r));
    let e_opt = opt.as_ref().map(|o| o.value).map_err(Clone::clone);
    p.metric(None, "excess", w.as_ref().map_err(Clone::clone).and_then(|w| excess_risk(&problem, w)));
    p.metric(None, "e_w0", adversarial_risk(&problem, &norm, &problem.w0(), r));
    p.metric(None, "ratio", e_lasso.clone().and_then(|a| e_opt.clone().and_then(|b| ratio(a, b))));
    p.metric(None, "e_lasso", e_lasso);
    p.metric(None, "e_opt", e_opt);
    let prof = tradeoff_profile(&problem, &norm, r, 1.0);
    p.metric(None, "theory_e_opt_proxy", prof.as_ref().map(|t| t.e_opt).map_err(Clone::clone));
    p.metric(None, "theory_eps_fl", prof.map(|t| t.eps_fl));
    Ok(())
}

/// `Σ = I`, `d` fixed, `n = round(d/γ)`, minimum-norm OLS under ℓ2 attacks.
fn overparam(cfg: &ExperimentConfig, gamma: f64, seed: u64, p: &mut Point) -> Result<()> {
    let d = cfg.d.unwrap_or(1000);
    let n = ((d as f64 / gamma).round() as usize).max(1);
    let sigma = cfg.sigma.unwrap_or(0.1);
    p.base.n = Some(n);
    p.base.d = Some(d);

    let problem = isotropic_problem(d, sigma, seed)?;
    let norm = AttackNorm::l2();
    let data = sample_dataset(&problem, n, splitmix64(seed))?;
    let w = ols(&data)?;
    let delta = excess_risk(&problem, &w)?;
    p.metric(None, "excess", Ok(delta));
    p.metric(None, "e_std", standard_risk(&problem, &w));
    let real_gamma = d as f64 / n as f64;
    if n != d {
        p.metric(None, "theory_excess", ols_asymptotic_excess(real_gamma, sigma * sigma / problem.w0_sigma_norm_sq()));
    }
    p.metric(None, "theory_null", Ok(problem.sigma2() + problem.w0_sigma_norm_sq()));
    // The OLS model lies in W_ε with ε = √Δ, so E_opt(r, ε) bounds it from below.
    let eps = delta.sqrt().min(1.0);
    let s = problem.w0_sigma_norm_sq();
    for &r in cfg.r.as_deref().unwrap_or(&[0.0]) {
        p.metric(Some(r), "e_ols", adversarial_risk(&problem, &norm, &w, r));
        let shape = if real_gamma < 1.0 { r * r } else { r.min(1.0).powi(2) };
        p.metric(Some(r), "theory_shape", Ok(problem.sigma2() + s * shape));
        p.metric(Some(r), "theory_lower", rigorous_lower(&problem, &norm, r, eps));
    }
    Ok(())
}

/// `Σ = I`, one dataset per replicate shared across the `r` sweep; OLS against
/// the exact optimum for each attacker norm.
fn ols_vs_opt(cfg: &ExperimentConfig, r: f64, rep: usize, p: &mut Point) -> Result<()> {
    let n = cfg.n.unwrap_or(200);
    let d = cfg.d.unwrap_or(20);
    let sigma = cfg.sigma.unwrap_or(0.1);
    let seed = replicate_seed(cfg.seed_value(), rep);
    p.base.seed = seed;
    p.base.n = Some(n);
    p.base.d = Some(d);
    p.base.r = Some(r);

    let problem = isotropic_problem(d, sigma, seed)?;
    let data = sample_dataset(&problem, n, splitmix64(seed))?;
    let w = ols(&data)?;
    p.metric(None, "excess", excess_risk(&problem, &w));
    for tag in cfg.norm.as_deref().unwrap_or(&[]) {
        let norm: AttackNorm = tag.parse()?;
        let e_ols = adversarial_risk(&problem, &norm, &w, r);
        let e_opt = exact_optimum(&problem, &norm, r).map(|o| o.value);
        p.metric(None, &format!("ratio_{tag}"), e_ols.clone().and_then(|a| e_opt.clone().and_then(|b| ratio(a, b))));
        p.metric(None, &format!("e_ols_{tag}"), e_ols);
        p.metric(None, &format!("e_opt_{tag}"), e_opt);
        p.metric(None, &format!("e_w0_{tag}"), adversarial_risk(&problem, &norm, &problem.w0(), r));
        p.metric(None, &format!("theory_lower_{tag}"), rigorous_lower(&problem, &norm, r, 1.0));
    }
    Ok(())
}

/// `λ_k = k^{-β}`, `c_k² = k^{-δ}` truncated at `d`, Euclidean attack.
fn polydecay(cfg: &ExperimentConfig, r: f64, p: &mut Point) -> Result<()> {
    let d = cfg.d.unwrap_or(10_000);
    let sigma = cfg.sigma.unwrap_or(0.0);
    let eps = cfg.eps.unwrap_or(0.3);
    let beta = cfg.beta.unwrap_or(2.0);
    let delta = cfg.delta.unwrap_or(0.5);
    p.base.d = Some(d);
    p.base.r = Some(r);
    p.base.eps = Some(eps);

    let eig: Vec<f64> = (1..=d).map(|k| (k as f64).powf(-beta)).collect();
    let coeffs: Vec<f64> = (1..=d).map(|k| (k as f64).powf(-delta / 2.0)).collect();
    let problem = ProblemSpec::new(eig, coeffs, sigma)?;
    let norm = AttackNorm::l2();
    let prof = tradeoff_profile(&problem, &norm, r, eps)?;
    p.metric(None, "eps_fl", Ok(prof.eps_fl));
    p.metric(None, "e_opt", Ok(prof.e_opt));
    p.metric(None, "e_opt_eps", Ok(prof.e_opt_eps));
    p.metric(None, "ratio", ratio(prof.e_opt_eps, prof.e_opt));
    p.metric(None, "e_w0", adversarial_risk(&problem, &norm, &problem.w0(), r));
    match polydecay_profile(beta, delta, sigma * sigma, r, eps) {
        Ok(t) => {
            p.metric(None, "theory_eps_fl", Ok(t.profile.eps_fl));
            p.metric(None, "theory_e_opt", Ok(t.profile.e_opt));
            p.metric(None, "theory_e_opt_eps", Ok(t.profile.e_opt_eps));
            p.metric(None, "theory_free_lunch", Ok(f64::from(u8::from(t.profile.free_lunch))));
        }
        Err(e) => p.metric(None, "theory_e_opt", Err(e)),
    }
    Ok(())
}

/// `Σ = I`, ℓ2 adversarial training (ridge) at tolerance `ε`. Two penalty maps
/// are reported: `t = s²` and `t = s`, with `s = ε/(1 − ε)`.
fn at_pareto(cfg: &ExperimentConfig, eps: f64, seed: u64, p: &mut Point) -> Result<()> {
    let n = cfg.n.unwrap_or(10_000);
    let d = cfg.d.unwrap_or(50);
    let sigma = cfg.sigma.unwrap_or(1.0);
    p.base.n = Some(n);
    p.base.d = Some(d);
    p.base.eps = Some(eps);

    let problem = isotropic_problem(d, sigma, seed)?;
    let norm = AttackNorm::l2();
    let data = sample_dataset(&problem, n, splitmix64(seed))?;
    let s = eps / (1.0 - eps);
    let w_literal = ridge_at(&data, s * s)?;
    let w_matched = ridge_at(&data, s)?;
    p.metric(None, "delta_literal", excess_risk(&problem, &w_literal));
    p.metric(None, "delta_matched", excess_risk(&problem, &w_matched));
    p.metric(None, "theory_delta", Ok(eps * eps));
    p.metric(None, "theory_lowsnr_ebar", at_lowsnr_asymptotics(d as f64 / n as f64, s, 0.0).map(|v| v.0));
    for &r in cfg.r.as_deref().unwrap_or(&[1.0]) {
        let e_at = adversarial_risk(&problem, &norm, &w_matched, r);
        let e_opt_eps = tradeoff_profile(&problem, &norm, r, eps).map(|t| t.e_exact_at_w_star);
        p.metric(Some(r), "ratio", e_at.clone().and_then(|a| e_opt_eps.clone().and_then(|b| ratio(a, b))));
        p.metric(Some(r), "e_at", e_at);
        p.metric(Some(r), "theory_e_opt_eps", e_opt_eps);
    }
    Ok(())
}

/// One random well-conditioned problem; every row is the slack of an
/// inequality that must hold.
fn bounds_check(value: f64, seed: u64, p: &mut Point) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=12usize);
    let mut eig: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let coeffs = gaussian_vec(&mut rng, d);
    let sigma = rng.random_range(0.0..0.5);
    let r = rng.random_range(0.0..2.0);
    let eps = rng.random_range(0.0..1.0);
    let w = gaussian_vec(&mut rng, d);
    let norm = match value as usize % 3 {
        0 => AttackNorm::l2(),
        1 => AttackNorm::linf(),
        _ => AttackNorm::lp(3.0)?,
    };
    let problem = ProblemSpec::new(eig, coeffs, sigma)?;
    p.base.d = Some(d);
    p.base.r = Some(r);
    p.base.eps = Some(eps);

    let e = adversarial_risk(&problem, &norm, &w, r)?;
    let px = proxy_risks(&problem, &norm, &w, r)?;
    p.check("proxy_sandwich_tilde_lower", Ok(e - px.tilde / c1()));
    p.check("proxy_sandwich_tilde_upper", Ok(c2() * px.tilde - e));
    p.check("proxy_sandwich_bar_lower", Ok(e - px.bar));
    p.check("proxy_sandwich_bar_upper", Ok(c2() * px.bar - e));

    let prof = tradeoff_profile(&problem, &norm, r, eps)?;
    let s = problem.w0_sigma_norm_sq();
    let scale = s.max(1.0);
    let tol = 1e-7 * scale;
    p.check("eps_fl_in_unit_interval", Ok(prof.eps_fl.min(1.0 - prof.eps_fl)));
    p.check("unconstrained_below_constrained", Ok(prof.e_opt_eps - prof.e_opt + tol));
    p.check("exact_within_c2_of_proxy", Ok(c2() * prof.e_opt_eps - prof.e_exact_at_w_star + tol));
    p.check("exact_above_proxy_bar", Ok(prof.e_exact_at_w_star - prof.e_opt_eps + tol));
    let lam = lambda_opt(&problem, &norm, r, eps)?;
    p.check("lambda_opt_feasible", Ok((r * r - lam).min(lam)));
    let e_w0 = adversarial_risk(&problem, &norm, &problem.w0(), r)?;
    p.check("w0_dominates_optimum", Ok(e_w0 - prof.e_opt_eps + tol));
    let (shrink, _) = e_shrink(&problem, &norm, r, eps)?;
    p.check("chord_upper_bound", Ok(shrink - prof.e_opt_eps + tol));
    p.check("chord_lower_bound", Ok(prof.e_opt_eps - rigorous_lower(&problem, &norm, r, eps)? + tol));
    let exact = exact_optimum(&problem, &norm, r)?;
    p.check("exact_optimum_above_proxy", Ok(exact.value - prof.e_opt + tol));
    p.check("exact_optimum_within_c2_of_proxy", Ok(c2() * prof.e_opt - exact.value + tol));
    p.check(
        "exact_optimum_not_above_path_point",
        Ok(prof.e_exact_at_w_star.min(e_w0) - exact.value + tol),
    );

    if norm.is_euclidean() {
        let g = gamma_bounds(&problem, &norm, r)?;
        let tol = 1e-9 * g.proxy_hi.max(1.0);
        p.check("gamma_proxy_bracket_lower", Ok(g.numeric - g.proxy_lo + tol));
        p.check("gamma_proxy_bracket_upper", Ok(g.proxy_hi - g.numeric + tol));
        p.check("gamma_spectral_bracket_lower", Ok(g.numeric - g.spectral_lo / std::f64::consts::SQRT_2 + tol));
        p.check("gamma_spectral_bracket_upper", Ok(g.spectral_hi - g.numeric + tol));
    }
    Ok(())
}
