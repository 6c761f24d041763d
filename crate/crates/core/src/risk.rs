//! Closed-form risks, excess-risk decompositions and bounds for Gaussian random
//! features with MCAR missingness, plus exact conditional risks given `W`.
//!
//! Notation: `R*` is the complete-data Bayes risk over linear predictors,
//! `R*_miss` the Bayes risk with access to the observation pattern, and
//! `R*_imp` the best linear risk on zero-imputed features. `Δ_miss =
//! E R*_miss − E R*` and `Δ_imp/miss = E R*_imp − E R*_miss`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, norm2, row_space_residual, trace_reg_inverse, Matrix, Vector};
use crate::missingness::check_rho;

/// Scalar arguments shared by the closed-form risks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskParams {
    pub p: usize,
    pub d: usize,
    pub rho: f64,
    pub sigma2: f64,
    pub beta_norm2: f64,
}

impl RiskParams {
    pub fn new(p: usize, d: usize, rho: f64, sigma2: f64, beta_norm2: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("p", "latent dimension must be at least 1"));
        }
        check_rho(rho)?;
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", "must be finite and nonnegative"));
        }
        if !(beta_norm2 >= 0.0) || !beta_norm2.is_finite() {
            return Err(Error::invalid("beta_norm2", "must be finite and nonnegative"));
        }
        Ok(Self {
            p,
            d,
            rho,
            sigma2,
            beta_norm2,
        })
    }

    pub fn with_d(self, d: usize) -> Self {
        Self { d, ..self }
    }

    /// Ridge strength induced by imputation: `(1 − rho) / rho`.
    pub fn lambda(&self) -> f64 {
        (1.0 - self.rho) / self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
}

impl BoundPair {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::invalid("bounds", format!("lower {lower} exceeds upper {upper}")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Containment after widening both ends by `slack`.
    pub fn contains_with_slack(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `ln P(B = k)` for `B ~ Binomial(n, rho)`, `k = 0..=n`.
pub fn binomial_ln_pmf(n: usize, rho: f64) -> Vec<f64> {
    let lf = ln_factorials(n);
    let (lr, lq) = (rho.ln(), (1.0 - rho).ln());
    (0..=n)
        .map(|k| {
            let miss = n - k;
            let tail = if miss == 0 { 0.0 } else { miss as f64 * lq };
            let head = if k == 0 { 0.0 } else { k as f64 * lr };
            lf[n] - lf[k] - lf[miss] + head + tail
        })
        .collect()
}

/// `P(B = k)` for `B ~ Binomial(n, rho)`, evaluated in log space.
pub fn binomial_pmf(n: usize, rho: f64) -> Vec<f64> {
    binomial_ln_pmf(n, rho).into_iter().map(f64::exp).collect()
}

/// `E R*(d) = sigma^2 + max(0, (p − d)/p) |beta|^2`.
pub fn risk_complete_expected(rp: &RiskParams) -> f64 {
    let frac = if rp.d >= rp.p { 0.0 } else { (rp.p - rp.d) as f64 / rp.p as f64 };
    rp.sigma2 + frac * rp.beta_norm2
}

/// `E[(p − B) 1{B ≤ p}] / p` with `B ~ Binomial(d, rho)` by exact pmf summation.
pub fn missing_fraction_pmf(p: usize, d: usize, rho: f64) -> f64 {
    let pmf = binomial_pmf(d, rho);
    compensated_sum(
        pmf.iter()
            .enumerate()
            .take(p.min(d) + 1)
            .map(|(k, w)| w * (p - k) as f64 / p as f64),
    )
}

/// `E R*_miss(d)` summed over the binomial law of the observed-feature count.
/// Valid for every `d`.
pub fn risk_missing_expected_pmf(rp: &RiskParams) -> f64 {
    rp.sigma2 + missing_fraction_pmf(rp.p, rp.d, rp.rho) * rp.beta_norm2
}

/// `E R*_miss(d)`: `sigma^2 + (p − rho d)/p |beta|^2` when `d < p`, otherwise
/// the binomial pmf sum.
pub fn risk_missing_expected(rp: &RiskParams) -> f64 {
    if rp.d < rp.p {
        let p = rp.p as f64;
        rp.sigma2 + (p - rp.rho * rp.d as f64) / p * rp.beta_norm2
    } else {
        risk_missing_expected_pmf(rp)
    }
}

/// `Δ_miss(d)`. For `d < p` this is `(1 − rho) d/p |beta|^2`; for `d ≥ p` the
/// pmf tail `E[(p − B)_+]/p |beta|^2`, summed directly so exponentially small
/// values keep full relative precision.
pub fn delta_miss(rp: &RiskParams) -> f64 {
    if rp.d < rp.p {
        let direct = (1.0 - rp.rho) * rp.d as f64 / rp.p as f64 * rp.beta_norm2;
        debug_assert!(
            (direct - (risk_missing_expected_pmf(rp) - risk_complete_expected(rp))).abs()
                <= 1e-10 * (1.0 + rp.beta_norm2 + rp.sigma2)
        );
        direct
    } else {
        missing_fraction_pmf(rp.p, rp.d, rp.rho) * rp.beta_norm2
    }
}

/// Smallest `d` for which the exponential sandwich on `Δ_miss` holds:
/// `max(p, (p + 1)(1 − rho) e / rho)`. The sandwich is a `d ≥ p` statement;
/// below `p` the lower bound can fail (p = 2, rho = 0.9, d = 1).
pub fn delta_miss_sandwich_threshold(p: usize, rho: f64) -> f64 {
    ((p as f64 + 1.0) * (1.0 - rho) * std::f64::consts::E / rho).max(p as f64)
}

/// `(rho / 2e)(1 − rho)^{d−1} |beta|^2 ≤ Δ_miss ≤ p (d rho / (p(1 − rho)))^p (1 − rho)^d |beta|^2`.
pub fn delta_miss_sandwich(rp: &RiskParams) -> Result<BoundPair> {
    let threshold = delta_miss_sandwich_threshold(rp.p, rp.rho);
    if rp.d == 0 || (rp.d as f64) < threshold {
        return Err(Error::NotApplicable(format!(
            "exponential bound on the missingness cost needs d >= {threshold:.3}, got d = {}",
            rp.d
        )));
    }
    if rp.rho == 1.0 {
        return Ok(BoundPair { lower: 0.0, upper: 0.0 });
    }
    let (p, d, rho) = (rp.p as f64, rp.d as f64, rp.rho);
    let lq = (1.0 - rho).ln();
    let ln_lower = (rho / (2.0 * std::f64::consts::E)).ln() + (d - 1.0) * lq;
    let ln_upper = p.ln() + p * ((d * rho).ln() - p.ln() - lq) + d * lq;
    BoundPair::new(ln_lower.exp() * rp.beta_norm2, ln_upper.exp() * rp.beta_norm2)
}

/// Bracket of the low-dimensional imputed-risk bound at feature count `k`:
/// `(p − rho k)/p + (1 − rho) rho (k − 1)/(p − rho (k − 1) − 2) · k/p`.
/// `None` when the denominator is not positive.
pub fn imputed_upper_bracket(p: usize, rho: f64, k: usize) -> Option<f64> {
    let (pf, kf) = (p as f64, k as f64);
    let denom = pf - rho * (kf - 1.0) - 2.0;
    if denom <= 0.0 {
        return None;
    }
    Some((pf - rho * kf) / pf + (1.0 - rho) * rho * (kf - 1.0) / denom * kf / pf)
}

/// Upper bound on `E R*_imp(d)`.
pub fn risk_imputed_upper(rp: &RiskParams) -> Result<f64> {
    if rp.d >= rp.p {
        let (p, d) = (rp.p as f64, rp.d as f64);
        return Ok(rp.sigma2 + p / (rp.rho * d + (1.0 - rp.rho) * p) * rp.beta_norm2);
    }
    let best = (1..=rp.d)
        .filter_map(|k| imputed_upper_bracket(rp.p, rp.rho, k))
        .min_by(f64::total_cmp)
        .ok_or_else(|| {
            Error::NotApplicable(format!("no feasible feature count for the imputed-risk bound at p = {}", rp.p))
        })?;
    Ok(rp.sigma2 + best * rp.beta_norm2)
}

/// Regime-dependent bounds on the imputation cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ImputationBounds {
    /// `d < p`: upper bound on `Δ_imp/miss` alone.
    LowDim { delta_impmiss_upper: f64 },
    /// `d ≥ p`: two-sided bound on `Δ_imp/miss + Δ_miss`.
    HighDim { total: BoundPair },
}

pub fn delta_impmiss_bounds(rp: &RiskParams) -> Result<ImputationBounds> {
    let (p, d, rho) = (rp.p as f64, rp.d as f64, rp.rho);
    if rp.d < rp.p {
        let denom = p - rho * (d - 1.0) - 2.0;
        if denom <= 0.0 {
            return Err(Error::NotApplicable(format!(
                "imputation cost bound needs p - rho (d - 1) - 2 > 0, got {denom}"
            )));
        }
        let upper = (1.0 - rho) * rho * (d - 1.0).max(0.0) / denom * d / p * rp.beta_norm2;
        Ok(ImputationBounds::LowDim { delta_impmiss_upper: upper })
    } else {
        let scale = p / (rho * d + (1.0 - rho) * p) * rp.beta_norm2;
        Ok(ImputationBounds::HighDim {
            total: BoundPair::new((1.0 - rho) * scale, scale)?,
        })
    }
}

/// `lambda |beta|^2 / p · Tr((W W^T + lambda I_d)^{-1})` for `d < p`, and the
/// same with `W^T W + lambda I_p` for `d ≥ p`. Its average over `W` equals
/// `Δ_imp/miss + Δ_miss`.
pub fn bias_trace_conditional(w: &Matrix, rho: f64, beta_norm2: f64) -> Result<f64> {
    check_rho(rho)?;
    if rho == 1.0 {
        return Ok(0.0);
    }
    let lambda = (1.0 - rho) / rho;
    let (d, p) = w.shape();
    let gram = if d < p { w * w.transpose() } else { w.transpose() * w };
    Ok(lambda * beta_norm2 / p as f64 * trace_reg_inverse(&gram, lambda)?)
}

fn check_linear_shapes(theta: &Vector, w: &Matrix, beta: &Vector) -> Result<()> {
    if theta.len() != w.nrows() {
        return Err(Error::shape("linear risk (theta)", w.nrows(), theta.len()));
    }
    if beta.len() != w.ncols() {
        return Err(Error::shape("linear risk (beta)", w.ncols(), beta.len()));
    }
    Ok(())
}

/// `R(theta) = sigma^2 + |beta − W^T theta|^2` on complete Gaussian features.
pub fn risk_linear_given_w(theta: &Vector, w: &Matrix, beta: &Vector, sigma2: f64) -> Result<f64> {
    check_linear_shapes(theta, w, beta)?;
    let resid = beta - w.transpose() * theta;
    Ok(sigma2 + norm2(&resid))
}

/// `R_imp(theta) = R(rho theta) + rho (1 − rho) |theta|^2_{diag(W W^T)}`.
pub fn risk_imputed_linear_given_w(theta: &Vector, w: &Matrix, beta: &Vector, sigma2: f64, rho: f64) -> Result<f64> {
    check_linear_shapes(theta, w, beta)?;
    check_rho(rho)?;
    let scaled = theta * rho;
    let base = risk_linear_given_w(&scaled, w, beta, sigma2)?;
    let penalty = compensated_sum(
        theta
            .iter()
            .zip(w.row_iter())
            .map(|(t, row)| t * t * row.norm_squared()),
    );
    Ok(base + rho * (1.0 - rho) * penalty)
}

/// `R*(W) = sigma^2 + |(I − P_W) beta|^2`, with `P_W` the projector onto the
/// row space of `W`.
pub fn risk_complete_given_w(w: &Matrix, beta: &Vector, sigma2: f64) -> Result<f64> {
    Ok(sigma2 + row_space_residual(w, beta)?)
}

/// Largest feature count for which [`risk_missing_given_w`] enumerates patterns.
pub const MAX_ENUMERATED_FEATURES: usize = 16;

/// `R*_miss(W) = sigma^2 + E_P |(I − P_{W_obs}) beta|^2` by exact enumeration of
/// the `2^d` observation patterns.
pub fn risk_missing_given_w(w: &Matrix, beta: &Vector, sigma2: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let (d, p) = w.shape();
    if beta.len() != p {
        return Err(Error::shape("risk_missing_given_w", p, beta.len()));
    }
    if d > MAX_ENUMERATED_FEATURES {
        return Err(Error::NotApplicable(format!(
            "pattern enumeration limited to d <= {MAX_ENUMERATED_FEATURES}, got {d}"
        )));
    }
    let b2 = norm2(beta);
    let (lr, lq) = (rho.ln(), (1.0 - rho).ln());
    let mut terms = Vec::with_capacity(1 << d);
    for pattern in 0u32..(1u32 << d) {
        let k = pattern.count_ones() as usize;
        let ln_w = k as f64 * lr + if d - k == 0 { 0.0 } else { (d - k) as f64 * lq };
        let weight = ln_w.exp();
        if weight == 0.0 {
            continue;
        }
        let resid = if k == 0 {
            b2
        } else {
            let rows: Vec<usize> = (0..d).filter(|j| pattern & (1 << j) != 0).collect();
            row_space_residual(&w.select_rows(rows.iter()), beta)?
        };
        terms.push(weight * resid);
    }
    Ok(sigma2 + compensated_sum(terms))
}

/// Imputed risk from population moments of `(X, Y)` under MCAR:
/// `E Y^2 − 2 rho theta^T b + theta^T (rho^2 S + rho (1 − rho) diag S) theta`,
/// with `S = E[X X^T]` and `b = E[X Y]`.
pub fn risk_imputed_from_moments(theta: &Vector, second_moment: &Matrix, cross: &Vector, ey2: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let d = theta.len();
    if second_moment.shape() != (d, d) || cross.len() != d {
        return Err(Error::shape("risk_imputed_from_moments", d, cross.len()));
    }
    let s_theta = second_moment * theta;
    let quad = compensated_sum((0..d).map(|j| {
        theta[j] * (rho * rho * s_theta[j] + rho * (1.0 - rho) * second_moment[(j, j)] * theta[j])
    }));
    Ok(ey2 - 2.0 * rho * theta.dot(cross) + quad)
}

/// `(L^2 / rho) / d · |f*|_nu^2`: bound on `E R*_imp(d) − R*(∞)` for a general
/// random feature model whose features satisfy `E[psi^2 | W] ≤ L^2`.
pub fn finite_feature_imputation_bound(d: usize, rho: f64, l2: f64, fstar_nu_norm2: f64) -> Result<f64> {
    check_rho(rho)?;
    if d == 0 || !(l2 > 0.0) || !(fstar_nu_norm2 >= 0.0) {
        return Err(Error::invalid("imputation bound", "need d >= 1, L^2 > 0, norm >= 0"));
    }
    Ok(l2 / rho / d as f64 * fstar_nu_norm2)
}

/// `E |W^†|_F^2 = d (1 + (d − 1)/(p − d − 1))` for `d < p − 1` unit-sphere rows.
pub fn expected_pinv_frobenius(p: usize, d: usize) -> Result<f64> {
    if d == 0 || d + 1 >= p {
        return Err(Error::NotApplicable(format!("needs 0 < d < p - 1, got p = {p}, d = {d}")));
    }
    let (pf, df) = (p as f64, d as f64);
    Ok(df * (1.0 + (df - 1.0) / (pf - df - 1.0)))
}

/// `E |theta*|^2 = |beta|^2 / p · E |W^†|_F^2` for `d < p − 1`.
pub fn expected_best_complete_norm2(p: usize, d: usize, beta_norm2: f64) -> Result<f64> {
    Ok(beta_norm2 / p as f64 * expected_pinv_frobenius(p, d)?)
}

/// Rate terms (constants dropped) of the averaged-SGD generalization bound
/// over `R*_miss` for `d < p − 1` with `gamma = 1/d`.
pub fn sgd_low_dim_rate(rp: &RiskParams, n: usize) -> Result<f64> {
    let (p, d, rho, n) = (rp.p as f64, rp.d as f64, rp.rho, n as f64);
    let denom = p - rho * (d - 1.0) - 2.0;
    if rp.d + 1 >= rp.p || denom <= 0.0 {
        return Err(Error::NotApplicable("low-dimensional rate needs d < p - 1".into()));
    }
    Ok(rho * (1.0 - rho) * d * (d - 1.0) / (p * denom) * rp.beta_norm2
        + d / (rho * n) * d / denom * rp.beta_norm2
        + rho * d / n * (rp.sigma2 + rp.beta_norm2))
}

/// Rate terms of the averaged-SGD bound over `R*(d)` for `d ≥ p` with
/// `gamma = 1/(d sqrt(n))`.
pub fn sgd_high_dim_rate(rp: &RiskParams, n: usize) -> Result<f64> {
    if rp.d < rp.p || rp.rho == 1.0 {
        return Err(Error::NotApplicable("high-dimensional rate needs d >= p and rho < 1".into()));
    }
    let (p, d, rho, sn) = (rp.p as f64, rp.d as f64, rp.rho, (n as f64).sqrt());
    Ok(p / (rho * d) * rp.beta_norm2
        + p / (rho * rho * (1.0 - rho) * sn) * rp.beta_norm2
        + (rp.sigma2 + rp.beta_norm2) / sn)
}
