//! Replication engine: Monte Carlo estimates over weight draws, risk curves,
//! SGD learning curves, and the masked-data convergence experiments.
//!
//! Replicate `r` always draws from `SeededRng::new(base_seed, r)` (forked per
//! grid point and purpose), replicates run in parallel, and aggregation is an
//! order-insensitive compensated sum, so results do not depend on the number
//! of worker threads.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{
    gaussian_rf, sample_fourier_weights, sample_latent, sample_output, sample_weights_sphere, BumpTarget,
    FeatureFamily, GaussianSampler, ModelSpec, FOURIER_FEATURE_SUP2,
};
use crate::error::{Error, Result};
use crate::estimators::{
    best_linear_imputed_closed, best_linear_imputed_from_moments, sgd_imputed, NormalEquations, Regime, SgdConfig,
};
use crate::linalg::{compensated_sum, row_space_residual, Matrix, Vector};
use crate::missingness::{check_rho, MaskDesign, MissingSpec};
use crate::risk::{
    binomial_ln_pmf, binomial_pmf, delta_impmiss_bounds, finite_feature_imputation_bound, risk_complete_expected,
    risk_complete_given_w, risk_imputed_from_moments, risk_imputed_linear_given_w, risk_imputed_upper,
    risk_missing_expected, risk_missing_given_w, ImputationBounds, RiskParams, MAX_ENUMERATED_FEATURES,
};
use crate::rng::{tags, SeededRng};

/// Absolute slack added to `k`-stderr comparisons so that deterministic
/// (zero-variance) estimates are compared up to floating-point roundoff.
pub const ROUNDOFF_SLACK: f64 = 1e-10;

/// Sample mean with the standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanStderr {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::invalid("replicates", format!("need at least 2 values for a standard error, got {n}")));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "replicate values" });
        }
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n as f64 - 1.0);
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            count: n,
        })
    }

    /// `|mean − reference| ≤ k stderr` (plus roundoff slack).
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr + ROUNDOFF_SLACK
    }
}

/// `sqrt(se_a^2 + se_b^2)`.
pub fn combined_stderr(a: &MeanStderr, b: &MeanStderr) -> f64 {
    a.stderr.hypot(b.stderr)
}

/// Replication settings shared by the experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationPlan {
    pub replicates: usize,
    pub base_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

impl ReplicationPlan {
    pub const DEFAULT_N_TRAIN: usize = 100_000;
    pub const DEFAULT_N_TEST: usize = 10_000;

    pub fn new(replicates: usize, base_seed: u64) -> Self {
        Self {
            replicates,
            base_seed,
            n_train: Self::DEFAULT_N_TRAIN,
            n_test: Self::DEFAULT_N_TEST,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::invalid("replicates", "need at least 2 replicates for a standard error"));
        }
        Ok(())
    }

    /// Stream for replicate `r` at grid key `key`.
    pub fn stream(&self, r: usize, key: u64) -> SeededRng {
        SeededRng::new(self.base_seed, r as u64).fork(key)
    }

    /// Runs `f` for every replicate in parallel; results in replicate order.
    pub fn map<T, F>(&self, key: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, SeededRng) -> Result<T> + Sync,
    {
        self.validate()?;
        (0..self.replicates)
            .into_par_iter()
            .map(|r| f(r, self.stream(r, key)))
            .collect()
    }

    /// Runs `f` over every `(grid point, replicate)` pair in parallel.
    pub fn map_grid<G, T, F>(&self, grid: &[G], f: F) -> Result<Vec<Vec<T>>>
    where
        G: Sync + GridKey,
        T: Send,
        F: Fn(&G, usize, SeededRng) -> Result<T> + Sync,
    {
        self.validate()?;
        let r = self.replicates;
        let flat: Vec<T> = (0..grid.len() * r)
            .into_par_iter()
            .map(|i| {
                let g = &grid[i / r];
                f(g, i % r, self.stream(i % r, g.key()))
            })
            .collect::<Result<_>>()?;
        let mut out: Vec<Vec<T>> = Vec::with_capacity(grid.len());
        let mut it = flat.into_iter();
        for _ in 0..grid.len() {
            out.push(it.by_ref().take(r).collect());
        }
        Ok(out)
    }
}

/// Key separating the random streams of different grid points.
pub trait GridKey {
    fn key(&self) -> u64;
}

impl GridKey for usize {
    fn key(&self) -> u64 {
        0x6772_6964_0000_0000 ^ *self as u64
    }
}

/// Monte Carlo estimate together with its analytic reference and bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub label: String,
    pub point_estimate: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub analytic_reference: Option<f64>,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
    pub within_bounds: bool,
}

impl RiskReport {
    pub fn new(label: impl Into<String>, est: MeanStderr) -> Self {
        let mut r = Self {
            label: label.into(),
            point_estimate: est.mean,
            stderr: est.stderr,
            replicates: est.count,
            analytic_reference: None,
            bound_lower: None,
            bound_upper: None,
            within_bounds: true,
        };
        r.refresh();
        r
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.analytic_reference = Some(reference);
        self.refresh();
        self
    }

    pub fn with_bounds(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.bound_lower = lower;
        self.bound_upper = upper;
        self.refresh();
        self
    }

    /// Reference within 3 stderr and estimate inside the bounds widened by 3 stderr.
    fn refresh(&mut self) {
        let slack = 3.0 * self.stderr + ROUNDOFF_SLACK;
        let est = self.point_estimate;
        let ok_ref = self.analytic_reference.is_none_or(|r| (est - r).abs() <= slack);
        let ok_lo = self.bound_lower.is_none_or(|l| est >= l - slack);
        let ok_hi = self.bound_upper.is_none_or(|u| est <= u + slack);
        self.within_bounds = ok_ref && ok_lo && ok_hi;
    }
}

/// Mean and standard error of the squared residuals `(y − x^T theta)^2`.
pub fn empirical_risk(theta: &Vector, x_eval: &Matrix, y_eval: &Vector) -> Result<MeanStderr> {
    if x_eval.ncols() != theta.len() || x_eval.nrows() != y_eval.len() {
        return Err(Error::shape("empirical_risk", theta.len(), x_eval.ncols()));
    }
    let resid = y_eval - x_eval * theta;
    let sq: Vec<f64> = resid.iter().map(|r| r * r).collect();
    MeanStderr::from_values(&sq)
}

/// Averages `experiment(W, rng)` over independent draws of `d x p` unit-sphere
/// weights, one per replicate.
pub fn expectation_over_weights<F>(p: usize, d: usize, plan: &ReplicationPlan, experiment: F) -> Result<MeanStderr>
where
    F: Fn(&Matrix, &mut SeededRng) -> Result<f64> + Sync,
{
    let vals = plan.map(d.key(), |_, rng| {
        let w = sample_weights_sphere(p, d, &mut rng.fork(tags::WEIGHTS));
        experiment(&w, &mut rng.fork(tags::THETA))
    })?;
    MeanStderr::from_values(&vals)
}

fn require_gaussian(model: &ModelSpec) -> Result<()> {
    if model.feature_family != FeatureFamily::GaussianSphere {
        return Err(Error::Config("this experiment needs gaussian_sphere features".into()));
    }
    Ok(())
}

/// Law of the observed-feature count `B ~ Binomial(d, rho)` restricted to
/// `B < p`: returns `P(B < p)` and the cumulative distribution of `B` given
/// `B < p` over `k = 0..min(d + 1, p)`.
fn rank_deficient_count_law(d: usize, p: usize, rho: f64) -> (f64, Vec<f64>) {
    let ln_pmf = binomial_ln_pmf(d, rho);
    let head = &ln_pmf[..(d + 1).min(p)];
    let top = head.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return (0.0, Vec::new());
    }
    let weights: Vec<f64> = head.iter().map(|l| (l - top).exp()).collect();
    let total = compensated_sum(weights.iter().copied());
    let mut acc = 0.0;
    let cdf = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    (top.exp() * total, cdf)
}

/// Unbiased estimate of `R*_miss(W)` from `patterns` sampled observation patterns.
///
/// Patterns with at least `p` observed rows span `R^p` when the rows of `W` are
/// in general position (almost surely for sphere draws) and contribute zero,
/// so the count is drawn conditionally on `B < p` and the result is weighted
/// by `P(B < p)`. The exponentially rare deficient patterns at `d ≫ p` are
/// thus still represented.
pub fn missing_risk_sampled(
    w: &Matrix,
    beta: &Vector,
    sigma2: f64,
    rho: f64,
    patterns: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    if patterns == 0 {
        return Err(Error::invalid("patterns", "need at least one pattern per weight draw"));
    }
    check_rho(rho)?;
    let (d, p) = w.shape();
    let (mass, cdf) = rank_deficient_count_law(d, p, rho);
    if mass == 0.0 {
        return Ok(sigma2);
    }
    let mut vals = Vec::with_capacity(patterns);
    for _ in 0..patterns {
        let u: f64 = rng.random();
        let k = cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1);
        let mut rows = rand::seq::index::sample(rng, d, k).into_vec();
        rows.sort_unstable();
        vals.push(row_space_residual(&w.select_rows(rows.iter()), beta)?);
    }
    Ok(sigma2 + mass * compensated_sum(vals) / patterns as f64)
}

/// `R*_imp(W)`: imputed risk of the best imputed linear predictor given `W`.
pub fn best_imputed_risk_given_w(w: &Matrix, beta: &Vector, sigma2: f64, rho: f64) -> Result<f64> {
    let theta = best_linear_imputed_closed(w, beta, rho)?.theta;
    risk_imputed_linear_given_w(&theta, w, beta, sigma2, rho)
}

/// One row of the risk-versus-feature-count curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurveRow {
    pub d: usize,
    pub complete: MeanStderr,
    pub complete_exact: f64,
    pub miss: MeanStderr,
    pub miss_exact: f64,
    pub imp: MeanStderr,
    /// Upper bound on `E R*_imp(d)`; absent when the bound is not applicable.
    pub imp_upper: Option<f64>,
    /// Lower bound on `E R*_imp(d)`: the imputation-cost lower bound when
    /// `d ≥ p`, and `E R*_miss(d)` (risk ordering) otherwise.
    pub imp_lower: f64,
}

/// Monte Carlo estimates of `E R*(d)`, `E R*_miss(d)` and `E R*_imp(d)` with
/// closed-form references, one fresh weight draw per `(d, replicate)`.
pub fn risk_curves_vs_d(
    d_grid: &[usize],
    model: &ModelSpec,
    rho: f64,
    plan: &ReplicationPlan,
    patterns_per_weight: usize,
) -> Result<Vec<RiskCurveRow>> {
    require_gaussian(model)?;
    check_rho(rho)?;
    if d_grid.is_empty() || d_grid.contains(&0) {
        return Err(Error::Config("d grid must be nonempty with positive entries".into()));
    }
    let (p, beta, sigma2) = (model.p, &model.beta_star, model.sigma2());
    let per_point = plan.map_grid(d_grid, |&d, _, rng| {
        let w = sample_weights_sphere(p, d, &mut rng.fork(tags::WEIGHTS));
        let complete = risk_complete_given_w(&w, beta, sigma2)?;
        let miss = missing_risk_sampled(&w, beta, sigma2, rho, patterns_per_weight, &mut rng.fork(tags::PATTERNS))?;
        let imp = best_imputed_risk_given_w(&w, beta, sigma2, rho)?;
        Ok([complete, miss, imp])
    })?;
    d_grid
        .iter()
        .zip(per_point)
        .map(|(&d, vals)| {
            let rp = RiskParams::new(p, d, rho, sigma2, model.beta_norm2())?;
            let col = |i: usize| MeanStderr::from_values(&vals.iter().map(|v| v[i]).collect::<Vec<_>>());
            let imp_lower = match delta_impmiss_bounds(&rp) {
                Ok(ImputationBounds::HighDim { total }) => risk_complete_expected(&rp) + total.lower,
                _ => risk_missing_expected(&rp),
            };
            Ok(RiskCurveRow {
                d,
                complete: col(0)?,
                complete_exact: risk_complete_expected(&rp),
                miss: col(1)?,
                miss_exact: risk_missing_expected(&rp),
                imp: col(2)?,
                imp_upper: risk_imputed_upper(&rp).ok(),
                imp_lower,
            })
        })
        .collect()
}

/// Two independent estimates of `E R*_miss(d)`: (a) masking a fresh weight draw
/// and taking the pattern-optimal risk, (b) mixing Monte Carlo estimates of
/// `E R*(k)` with binomial weights `P(B = k)`.
pub fn pattern_mixture_agreement(
    p: usize,
    d: usize,
    rho: f64,
    sigma2: f64,
    beta: &Vector,
    plan: &ReplicationPlan,
) -> Result<(MeanStderr, MeanStderr)> {
    check_rho(rho)?;
    let direct_vals = plan.map(d.key() ^ 0xa, |_, rng| {
        let w = sample_weights_sphere(p, d, &mut rng.fork(tags::WEIGHTS));
        missing_risk_sampled(&w, beta, sigma2, rho, 1, &mut rng.fork(tags::PATTERNS))
    })?;
    let direct = MeanStderr::from_values(&direct_vals)?;

    let pmf = binomial_pmf(d, rho);
    let mut mean_terms = Vec::new();
    let mut var_terms = Vec::new();
    for (k, &weight) in pmf.iter().enumerate() {
        if weight < 1e-15 {
            continue;
        }
        if k == 0 {
            mean_terms.push(weight * (sigma2 + beta.norm_squared()));
            continue;
        }
        let vals = plan.map(((d as u64) << 32) ^ k as u64 ^ 0xb, |_, rng| {
            let w = sample_weights_sphere(p, k, &mut rng.fork(tags::WEIGHTS));
            risk_complete_given_w(&w, beta, sigma2)
        })?;
        let est = MeanStderr::from_values(&vals)?;
        mean_terms.push(weight * est.mean);
        var_terms.push((weight * est.stderr).powi(2));
    }
    let mixture = MeanStderr {
        mean: compensated_sum(mean_terms),
        stderr: compensated_sum(var_terms).sqrt(),
        count: plan.replicates,
    };
    Ok((direct, mixture))
}

/// Empirical MSE of `theta` on `n` fresh MCAR-masked, zero-imputed samples.
pub fn empirical_imputed_risk_given_w(
    theta: &Vector,
    w: &Matrix,
    beta: &Vector,
    sigma: f64,
    rho: f64,
    n: usize,
    rng: &mut SeededRng,
) -> Result<MeanStderr> {
    check_rho(rho)?;
    let d = w.nrows();
    if theta.len() != d {
        return Err(Error::shape("empirical_imputed_risk_given_w", d, theta.len()));
    }
    let sampler = GaussianSampler::new(w.clone(), beta.clone(), sigma)?;
    let (mut data_rng, mut mask_rng) = (rng.fork(tags::LATENT), rng.fork(tags::MASK));
    let mut x = vec![0.0; d];
    let sq: Vec<f64> = (0..n)
        .map(|_| {
            let y = sampler.sample_into(&mut data_rng, &mut x);
            let mut pred = 0.0;
            for (xj, tj) in x.iter().zip(theta.iter()) {
                if mask_rng.random::<f64>() < rho {
                    pred += xj * tj;
                }
            }
            (y - pred) * (y - pred)
        })
        .collect();
    MeanStderr::from_values(&sq)
}

/// Settings of an SGD learning curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdCurveSpec {
    pub rho: f64,
    pub n_grid: Vec<usize>,
    pub regime: Regime,
    pub kappa: f64,
    pub gamma_mult: f64,
}

/// One row of an SGD learning curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdCurveRow {
    pub n: usize,
    pub gamma: f64,
    /// `R_imp(theta_bar) − reference(W)` over completed replicates.
    pub excess: Option<MeanStderr>,
    /// `R_imp(theta_bar) − R*_imp(W)`: excess minus the imputation plateau.
    pub learning_error: Option<MeanStderr>,
    /// Mean of the per-weight reference risk.
    pub reference_risk: f64,
    /// Mean of `R*_imp(W) − reference(W)`.
    pub plateau: f64,
    pub excluded: usize,
    pub completed: usize,
}

impl SgdCurveRow {
    pub fn excluded_fraction(&self) -> f64 {
        self.excluded as f64 / (self.excluded + self.completed).max(1) as f64
    }
}

/// Maximum fraction of divergent replicates tolerated by the experiment drivers.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

/// Per-weight reference risk: `R*_miss(W)` for the low-dimensional regime
/// (exact pattern enumeration when `d` is small enough, the closed-form
/// expectation otherwise) and `R*(W)` for the others.
fn sgd_reference(model: &ModelSpec, w: &Matrix, rho: f64, regime: Regime) -> Result<f64> {
    let sigma2 = model.sigma2();
    match regime {
        Regime::LowDim if w.nrows() <= MAX_ENUMERATED_FEATURES => risk_missing_given_w(w, &model.beta_star, sigma2, rho),
        Regime::LowDim => Ok(risk_missing_expected(&RiskParams::new(
            model.p,
            w.nrows(),
            rho,
            sigma2,
            model.beta_norm2(),
        )?)),
        Regime::HighDim | Regime::General => risk_complete_given_w(w, &model.beta_star, sigma2),
    }
}

/// Averaged-SGD excess risk as a function of the sample size. Each replicate
/// keeps its weights across the `n` grid; each `n` is a separate single pass.
pub fn sgd_learning_curve(model: &ModelSpec, spec: &SgdCurveSpec, plan: &ReplicationPlan) -> Result<Vec<SgdCurveRow>> {
    require_gaussian(model)?;
    check_rho(spec.rho)?;
    let (p, d) = (model.p, model.d);
    if spec.n_grid.is_empty() || spec.n_grid.contains(&0) {
        return Err(Error::Config("n grid must be nonempty with positive entries".into()));
    }
    match spec.regime {
        Regime::LowDim if d + 1 >= p => {
            return Err(Error::Config(format!("low_dim regime needs d < p - 1, got d = {d}, p = {p}")))
        }
        Regime::HighDim if d < p => return Err(Error::Config(format!("high_dim regime needs d >= p, got d = {d}, p = {p}"))),
        _ => {}
    }
    plan.validate()?;

    struct Rep {
        reference: f64,
        optimum: f64,
        risks: Vec<Option<f64>>,
    }
    let reps = plan.map(0x5364, |_, rng| {
        let w = sample_weights_sphere(p, d, &mut rng.fork(tags::WEIGHTS));
        let reference = sgd_reference(model, &w, spec.rho, spec.regime)?;
        let optimum = best_imputed_risk_given_w(&w, &model.beta_star, model.sigma2(), spec.rho)?;
        let sampler = GaussianSampler::new(w.clone(), model.beta_star.clone(), model.sigma)?;
        let mut risks = Vec::with_capacity(spec.n_grid.len());
        for &n in &spec.n_grid {
            let cfg = SgdConfig::from_policy(spec.regime, d, n, spec.kappa, spec.gamma_mult)?;
            let (mut data_rng, mut mask_rng) = (rng.fork(tags::LATENT), rng.fork(tags::MASK));
            let stream = (0..n).map(|_| {
                let mut x = vec![0.0; d];
                let y = sampler.sample_into(&mut data_rng, &mut x);
                for v in x.iter_mut() {
                    if mask_rng.random::<f64>() >= spec.rho {
                        *v = 0.0;
                    }
                }
                (x, y)
            });
            match sgd_imputed(stream, d, cfg.gamma, &[]) {
                Ok(trace) => risks.push(Some(risk_imputed_linear_given_w(
                    &trace.theta_bar,
                    &w,
                    &model.beta_star,
                    model.sigma2(),
                    spec.rho,
                )?)),
                Err(Error::Divergence { .. }) => risks.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(Rep { reference, optimum, risks })
    })?;

    let reference_risk = compensated_sum(reps.iter().map(|r| r.reference)) / reps.len() as f64;
    let plateau = compensated_sum(reps.iter().map(|r| r.optimum - r.reference)) / reps.len() as f64;
    spec.n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let gamma = SgdConfig::from_policy(spec.regime, d, n, spec.kappa, spec.gamma_mult)?.gamma;
            let done: Vec<&Rep> = reps.iter().filter(|r| r.risks[i].is_some()).collect();
            let excess: Vec<f64> = done.iter().map(|r| r.risks[i].unwrap_or(f64::NAN) - r.reference).collect();
            let learning: Vec<f64> = done.iter().map(|r| r.risks[i].unwrap_or(f64::NAN) - r.optimum).collect();
            Ok(SgdCurveRow {
                n,
                gamma,
                excess: MeanStderr::from_values(&excess).ok(),
                learning_error: MeanStderr::from_values(&learning).ok(),
                reference_risk,
                plateau,
                excluded: reps.len() - done.len(),
                completed: done.len(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`; `None` unless every value is
/// positive and at least two points are given.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

/// One row of the masked-data convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputedRiskRow {
    pub d: usize,
    /// Held-out MSE of the least-squares fit on imputed training data.
    pub risk: MeanStderr,
    /// Mean of the closed-form `R*_imp(W)` under MCAR over the same weights;
    /// only available for MCAR masks.
    pub mcar_closed_form: Option<MeanStderr>,
    pub sigma2_reference: f64,
}

/// Monotone-trend summary of a risk curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendStatistic {
    /// Every consecutive estimate is smaller than the previous one.
    pub decreasing: bool,
    /// Last estimate divided by the first.
    pub ratio_last_first: f64,
    /// Log-log slope of `risk − sigma^2` against `d`, when defined.
    pub loglog_slope: Option<f64>,
}

impl TrendStatistic {
    pub fn from_rows(rows: &[ImputedRiskRow]) -> Option<Self> {
        if rows.len() < 2 {
            return None;
        }
        let decreasing = rows.windows(2).all(|w| w[1].risk.mean < w[0].risk.mean);
        let first = rows[0].risk.mean;
        let last = rows[rows.len() - 1].risk.mean;
        let ds: Vec<f64> = rows.iter().map(|r| r.d as f64).collect();
        let ex: Vec<f64> = rows.iter().map(|r| r.risk.mean - r.sigma2_reference).collect();
        Some(Self {
            decreasing,
            ratio_last_first: last / first,
            loglog_slope: loglog_slope(&ds, &ex),
        })
    }
}

/// Rows per training chunk when accumulating normal equations.
const CHUNK_ROWS: usize = 2048;

fn masked_block(
    model: &ModelSpec,
    w: &Matrix,
    spec: &MissingSpec,
    rows: usize,
    data_rng: &mut SeededRng,
    mask_rng: &mut SeededRng,
) -> Result<(Matrix, Vector)> {
    let z = sample_latent(rows, model.p, data_rng);
    let mut x = gaussian_rf(&z, w)?;
    let y = sample_output(&z, &model.beta_star, model.sigma, data_rng)?;
    let mask = spec.sample_mask(&z, w.nrows(), mask_rng)?;
    x.component_mul_assign(&mask);
    Ok((x, y))
}

/// Estimates `E R*_imp(d)` under an arbitrary mask design: least squares on
/// `n_train` imputed samples, evaluated on `n_test` fresh imputed samples.
/// Under MCAR the closed-form `R*_imp(W)` for the same weights is reported too.
pub fn imputed_risk_experiment(
    model: &ModelSpec,
    design: &MaskDesign,
    d_grid: &[usize],
    plan: &ReplicationPlan,
) -> Result<Vec<ImputedRiskRow>> {
    require_gaussian(model)?;
    if d_grid.is_empty() || d_grid.contains(&0) {
        return Err(Error::Config("d grid must be nonempty with positive entries".into()));
    }
    if plan.n_train == 0 || plan.n_test < 2 {
        return Err(Error::Config("need n_train >= 1 and n_test >= 2".into()));
    }
    let per_point = plan.map_grid(d_grid, |&d, _, rng| {
        let w = sample_weights_sphere(model.p, d, &mut rng.fork(tags::WEIGHTS));
        let spec = design.realize(model.p, d, &mut rng.fork(tags::MISSING_PARAMS))?;
        let (mut data_rng, mut mask_rng) = (rng.fork(tags::LATENT), rng.fork(tags::MASK));
        let mut ne = NormalEquations::new(d);
        let mut left = plan.n_train;
        while left > 0 {
            let rows = left.min(CHUNK_ROWS);
            let (x, y) = masked_block(model, &w, &spec, rows, &mut data_rng, &mut mask_rng)?;
            ne.add_block(&x, &y)?;
            left -= rows;
        }
        let theta = ne.solve(0.0)?.theta;
        let (mut test_rng, mut test_mask_rng) = (rng.fork(tags::TEST), rng.fork(tags::TEST ^ tags::MASK << 8));
        let (x, y) = masked_block(model, &w, &spec, plan.n_test, &mut test_rng, &mut test_mask_rng)?;
        let risk = empirical_risk(&theta, &x, &y)?.mean;
        let closed = match design {
            MaskDesign::Mcar { rho } => Some(best_imputed_risk_given_w(&w, &model.beta_star, model.sigma2(), *rho)?),
            MaskDesign::MnarLogistic(_) => None,
        };
        Ok((risk, closed))
    })?;
    d_grid
        .iter()
        .zip(per_point)
        .map(|(&d, vals)| {
            let risks: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let closed: Option<Vec<f64>> = vals.iter().map(|v| v.1).collect();
            Ok(ImputedRiskRow {
                d,
                risk: MeanStderr::from_values(&risks)?,
                mcar_closed_form: closed.map(|c| MeanStderr::from_values(&c)).transpose()?,
                sigma2_reference: model.sigma2(),
            })
        })
        .collect()
}

/// Table and trend summary of the MNAR convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MnarOutcome {
    pub rows: Vec<ImputedRiskRow>,
    pub trend: Option<TrendStatistic>,
}

/// `R*_imp(d)` under logistic MNAR masks, with the monotone trend toward
/// `R*(∞) = sigma^2`.
pub fn mnar_convergence_experiment(
    model: &ModelSpec,
    design: &MaskDesign,
    d_grid: &[usize],
    plan: &ReplicationPlan,
) -> Result<MnarOutcome> {
    let rows = imputed_risk_experiment(model, design, d_grid, plan)?;
    let trend = TrendStatistic::from_rows(&rows);
    Ok(MnarOutcome { rows, trend })
}

/// One row of the Fourier-feature imputation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierRow {
    pub d: usize,
    /// `R*_imp(d) − R*(∞)` over weight draws.
    pub excess: MeanStderr,
    /// `(L^2 / rho) / d · |f*|_nu^2` with `L^2 = 9` and the representing-weight norm.
    pub bound: f64,
}

/// `E R*_imp(d) − sigma^2` for Fourier features and a Gaussian-bump target,
/// computed exactly given the weights from closed-form population moments.
/// The target lies in the infinite-feature class, so `R*(∞) = sigma^2`.
pub fn fourier_imputation_excess(
    p: usize,
    d_grid: &[usize],
    target: &BumpTarget,
    rho: f64,
    sigma2: f64,
    plan: &ReplicationPlan,
) -> Result<Vec<FourierRow>> {
    check_rho(rho)?;
    target.validate(p)?;
    if d_grid.is_empty() || d_grid.contains(&0) {
        return Err(Error::Config("d grid must be nonempty with positive entries".into()));
    }
    let ef2 = target.second_moment();
    let per_point = plan.map_grid(d_grid, |&d, _, rng| {
        let fw = sample_fourier_weights(p, d, &mut rng.fork(tags::WEIGHTS));
        let s = fw.second_moment();
        let b = target.feature_cross_moment(&fw);
        let theta = best_linear_imputed_from_moments(&s, &b, rho)?.theta;
        Ok(risk_imputed_from_moments(&theta, &s, &b, ef2 + sigma2, rho)? - sigma2)
    })?;
    let nu = target.nu_norm2_upper();
    d_grid
        .iter()
        .zip(per_point)
        .map(|(&d, vals)| {
            Ok(FourierRow {
                d,
                excess: MeanStderr::from_values(&vals)?,
                bound: finite_feature_imputation_bound(d, rho, FOURIER_FEATURE_SUP2, nu)?,
            })
        })
        .collect()
}
