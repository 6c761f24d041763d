//! Oracle suite run by `rfimpute validate`: each check compares a Monte Carlo
//! or exact computation against an independent closed-form constant.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::datagen::{sample_weights_sphere, FeatureFamily, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm2, hadamard, min_eigenvalue, pseudo_inverse, row_space_residual, trace_reg_inverse, Matrix, Vector};
use crate::montecarlo::{
    combined_stderr, empirical_imputed_risk_given_w, pattern_mixture_agreement, risk_curves_vs_d, MeanStderr,
    ReplicationPlan, ROUNDOFF_SLACK,
};
use crate::risk::{
    delta_miss, delta_miss_sandwich, delta_miss_sandwich_threshold, expected_pinv_frobenius,
    risk_imputed_linear_given_w, risk_missing_expected, risk_missing_expected_pmf, RiskParams,
};
use crate::rng::SeededRng;

pub const CHECK_NAMES: [&str; 9] = [
    "isotropic_quadratic_form",
    "pinv_frobenius_moment",
    "hadamard_monotonicity",
    "regularized_trace_bounds",
    "imputed_risk_decomposition",
    "missing_risk_branch_agreement",
    "pattern_mixture_agreement",
    "risk_ordering",
    "missing_delta_sandwich",
];

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub statistic: f64,
    pub tolerance: f64,
    pub reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub version: &'static str,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Multiplier applied to an oracle constant by the mutation hook.
const PERTURBATION: f64 = 1.25;

struct Ctx {
    seed: u64,
    perturb: Option<String>,
}

impl Ctx {
    fn perturbed(&self, name: &str) -> bool {
        self.perturb.as_deref() == Some(name)
    }

    fn plan(&self, replicates: usize, salt: u64) -> ReplicationPlan {
        ReplicationPlan::new(replicates, self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

fn mean_check(name: &'static str, est: MeanStderr, reference: f64) -> Check {
    let statistic = (est.mean - reference).abs();
    let tolerance = 3.0 * est.stderr + ROUNDOFF_SLACK;
    Check {
        name,
        pass: statistic <= tolerance,
        statistic,
        tolerance,
        reference,
        reference_upper: None,
        stderr: Some(est.stderr),
        replicates: est.count,
    }
}

/// `E β^T (I − P_W) β = |β|^2 (p − d)/p` for unit-sphere rows.
fn isotropic_quadratic_form(ctx: &Ctx) -> Result<Check> {
    let (p, d) = (10, 4);
    let beta = Vector::from_vec(vec![1.0, 2.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0]);
    let plan = ctx.plan(2000, 1);
    let vals = plan.map(0, |_, mut rng| row_space_residual(&sample_weights_sphere(p, d, &mut rng), &beta))?;
    let mut reference = beta.norm_squared() * (p - d) as f64 / p as f64;
    if ctx.perturbed("isotropic_quadratic_form") {
        reference *= PERTURBATION;
    }
    Ok(mean_check("isotropic_quadratic_form", MeanStderr::from_values(&vals)?, reference))
}

/// `E |W^†|_F^2 = d (1 + (d − 1)/(p − d − 1))`, here 10 at `(p, d) = (10, 5)`,
/// additionally within 2% relative error.
fn pinv_frobenius_moment(ctx: &Ctx) -> Result<Check> {
    let (p, d) = (10, 5);
    let plan = ctx.plan(10_000, 2);
    let vals = plan.map(0, |_, mut rng| Ok(frobenius_norm2(&pseudo_inverse(&sample_weights_sphere(p, d, &mut rng))?)))?;
    let mut reference = expected_pinv_frobenius(p, d)?;
    if ctx.perturbed("pinv_frobenius_moment") {
        reference *= PERTURBATION;
    }
    let est = MeanStderr::from_values(&vals)?;
    let mut check = mean_check("pinv_frobenius_moment", est, reference);
    check.pass &= check.statistic < 0.02 * reference;
    Ok(check)
}

fn random_psd(n: usize, rank: usize, rng: &mut SeededRng) -> Matrix {
    let g = Matrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g * g.transpose()
}

/// `A ⪯ B` implies `A ⊙ V ⪯ B ⊙ V`: the smallest scaled eigenvalue of
/// `(B − A) ⊙ V` over random PSD triples stays above `−1e-8`.
fn hadamard_monotonicity(ctx: &Ctx) -> Result<Check> {
    let n = 5;
    let plan = ctx.plan(500, 3);
    let vals = plan.map(0, |r, mut rng| {
        let a = random_psd(n, 1 + r % n, &mut rng);
        let b = &a + random_psd(n, 1 + (r / n) % n, &mut rng);
        let v = random_psd(n, 1 + (r / (n * n)) % n, &mut rng);
        let diff = hadamard(&(&b - &a), &v)?;
        let scale = (&b - &a).norm() * v.norm();
        Ok(min_eigenvalue(&diff)? / scale)
    })?;
    let statistic = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = if ctx.perturbed("hadamard_monotonicity") { 1.0 } else { 0.0 };
    let tolerance = 1e-8;
    Ok(Check {
        name: "hadamard_monotonicity",
        pass: statistic >= reference - tolerance,
        statistic,
        tolerance,
        reference,
        reference_upper: None,
        stderr: None,
        replicates: vals.len(),
    })
}

/// `p/(dα + λ) ≤ E Tr((A + λI)^{-1}) ≤ (1 + 1/λ) p/(dα + λ)` for
/// `A = Σ_j Z_j Z_j^T` with unit-sphere `Z_j` (`α = 1/p`).
fn regularized_trace_bounds(ctx: &Ctx) -> Result<Check> {
    let (p, d, lambda) = (5, 20, 0.25);
    let plan = ctx.plan(1000, 4);
    let vals = plan.map(0, |_, mut rng| {
        let z = sample_weights_sphere(p, d, &mut rng);
        trace_reg_inverse(&(z.transpose() * &z), lambda)
    })?;
    let est = MeanStderr::from_values(&vals)?;
    let mut lower = p as f64 / (d as f64 / p as f64 + lambda);
    let upper = (1.0 + 1.0 / lambda) * lower;
    if ctx.perturbed("regularized_trace_bounds") {
        lower = upper * PERTURBATION;
    }
    let tolerance = 3.0 * est.stderr + ROUNDOFF_SLACK;
    Ok(Check {
        name: "regularized_trace_bounds",
        pass: est.mean >= lower - tolerance && est.mean <= upper + tolerance,
        statistic: est.mean,
        tolerance,
        reference: lower,
        reference_upper: Some(upper),
        stderr: Some(est.stderr),
        replicates: est.count,
    })
}

/// Empirical imputed MSE against `R(ρθ) + ρ(1 − ρ)|θ|^2` on 20 random
/// `(θ, W, ρ)` triples with 10^5 samples each; at least 19 must agree.
fn imputed_risk_decomposition(ctx: &Ctx) -> Result<Check> {
    let triples = 20;
    let n = 100_000;
    let plan = ctx.plan(triples, 5);
    let factor = if ctx.perturbed("imputed_risk_decomposition") { PERTURBATION } else { 1.0 };
    let agree = plan.map(0, |r, mut rng| {
        let p = 3 + r % 6;
        let d = 2 + r % 5;
        let rho = rng.random_range(0.3..0.95);
        let sigma = 0.5;
        let w = sample_weights_sphere(p, d, &mut rng);
        let beta = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let theta = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let reference = risk_imputed_linear_given_w(&theta, &w, &beta, sigma * sigma, rho)? * factor;
        let est = empirical_imputed_risk_given_w(&theta, &w, &beta, sigma, rho, n, &mut rng)?;
        Ok(est.agrees_with(reference, 3.0))
    })?;
    let passed = agree.iter().filter(|a| **a).count();
    Ok(Check {
        name: "imputed_risk_decomposition",
        pass: passed >= triples - 1,
        statistic: passed as f64,
        tolerance: (triples - 1) as f64,
        reference: triples as f64,
        reference_upper: None,
        stderr: None,
        replicates: triples * n,
    })
}

/// The binomial-sum and linear forms of `E R*_miss(d)` agree for `d ≤ p`.
fn missing_risk_branch_agreement(ctx: &Ctx) -> Result<Check> {
    let shift = if ctx.perturbed("missing_risk_branch_agreement") { PERTURBATION - 1.0 } else { 0.0 };
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for p in [1, 2, 5, 10, 50, 100] {
        for rho in [0.1, 0.5, 0.8, 0.95, 1.0] {
            for d in 0..=p {
                let rp = RiskParams::new(p, d, rho, 0.3, 1.7)?;
                let linear = rp.sigma2 + (p as f64 - rho * d as f64) / p as f64 * rp.beta_norm2 + shift;
                worst = worst.max((risk_missing_expected_pmf(&rp) - linear).abs());
                count += 1;
            }
        }
    }
    let tolerance = 1e-12;
    Ok(Check {
        name: "missing_risk_branch_agreement",
        pass: worst <= tolerance,
        statistic: worst,
        tolerance,
        reference: 0.0,
        reference_upper: None,
        stderr: None,
        replicates: count,
    })
}

/// Two independent estimators of `E R*_miss(d)` agree within 3 combined stderr.
fn pattern_mixture(ctx: &Ctx) -> Result<Check> {
    let (p, d, rho, sigma2) = (10, 6, 0.7, 0.25);
    let beta = Vector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let plan = ctx.plan(400, 6);
    let (direct, mut mixture) = pattern_mixture_agreement(p, d, rho, sigma2, &beta, &plan)?;
    if ctx.perturbed("pattern_mixture_agreement") {
        mixture.mean *= PERTURBATION;
    }
    let se = combined_stderr(&direct, &mixture);
    let statistic = (direct.mean - mixture.mean).abs();
    let tolerance = 3.0 * se + ROUNDOFF_SLACK;
    Ok(Check {
        name: "pattern_mixture_agreement",
        pass: statistic <= tolerance,
        statistic,
        tolerance,
        reference: risk_missing_expected(&RiskParams::new(p, d, rho, sigma2, 1.0)?),
        reference_upper: None,
        stderr: Some(se),
        replicates: direct.count,
    })
}

/// `R* ≤ R*_miss ≤ R*_imp` on a small grid, up to 3 combined stderr.
fn risk_ordering(ctx: &Ctx) -> Result<Check> {
    let model = ModelSpec::with_beta_norm(20, 5, 0.0, 1.0, FeatureFamily::GaussianSphere)?;
    let plan = ctx.plan(100, 7);
    let grid = [5, 10, 15, 19, 20, 30, 40, 80];
    let rows = risk_curves_vs_d(&grid, &model, 0.8, &plan, 2)?;
    let shift = if ctx.perturbed("risk_ordering") { 1.0 } else { 0.0 };
    let violations = rows
        .iter()
        .filter(|r| {
            let c = r.complete.mean + shift;
            c > r.miss.mean + 3.0 * combined_stderr(&r.complete, &r.miss) + ROUNDOFF_SLACK
                || r.miss.mean > r.imp.mean + 3.0 * combined_stderr(&r.miss, &r.imp) + ROUNDOFF_SLACK
        })
        .count();
    Ok(Check {
        name: "risk_ordering",
        pass: violations == 0,
        statistic: violations as f64,
        tolerance: 0.0,
        reference: 0.0,
        reference_upper: None,
        stderr: None,
        replicates: plan.replicates * grid.len(),
    })
}

/// Exact `Δ_miss` inside its exponential sandwich for `p ∈ {2, 3, 5}`,
/// `ρ ∈ {0.8, 0.9}` and every valid `d ≤ 100`.
fn missing_delta_sandwich(ctx: &Ctx) -> Result<Check> {
    let shrink = if ctx.perturbed("missing_delta_sandwich") { 0.5 } else { 1.0 };
    let mut violations = 0;
    let mut count = 0;
    for p in [2, 3, 5] {
        for rho in [0.8, 0.9] {
            let first = delta_miss_sandwich_threshold(p, rho).ceil().max(1.0) as usize;
            for d in first..=100 {
                let rp = RiskParams::new(p, d, rho, 0.0, 1.0)?;
                let bounds = match delta_miss_sandwich(&rp) {
                    Ok(b) => b,
                    Err(Error::NotApplicable(_)) => continue,
                    Err(e) => return Err(e),
                };
                let delta = delta_miss(&rp);
                if !(bounds.lower <= delta && delta <= bounds.upper * shrink) {
                    violations += 1;
                }
                count += 1;
            }
        }
    }
    Ok(Check {
        name: "missing_delta_sandwich",
        pass: violations == 0,
        statistic: violations as f64,
        tolerance: 0.0,
        reference: 0.0,
        reference_upper: None,
        stderr: None,
        replicates: count,
    })
}

/// Runs every check. `perturb` names a check whose oracle constant is
/// deliberately altered, to confirm the harness can fail.
pub fn run_validation(seed: u64, perturb: Option<&str>) -> Result<ValidationReport> {
    if let Some(name) = perturb {
        if !CHECK_NAMES.contains(&name) {
            return Err(Error::Config(format!("unknown check `{name}`; expected one of {}", CHECK_NAMES.join(", "))));
        }
    }
    let ctx = Ctx {
        seed,
        perturb: perturb.map(str::to_string),
    };
    let checks = vec![
        isotropic_quadratic_form(&ctx)?,
        pinv_frobenius_moment(&ctx)?,
        hadamard_monotonicity(&ctx)?,
        regularized_trace_bounds(&ctx)?,
        imputed_risk_decomposition(&ctx)?,
        missing_risk_branch_agreement(&ctx)?,
        pattern_mixture(&ctx)?,
        risk_ordering(&ctx)?,
        missing_delta_sandwich(&ctx)?,
    ];
    debug_assert!(checks.iter().map(|c| c.name).eq(CHECK_NAMES));
    Ok(ValidationReport {
        version: env!("CARGO_PKG_VERSION"),
        seed,
        checks,
    })
}
