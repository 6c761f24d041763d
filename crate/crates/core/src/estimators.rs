//! Linear predictors: best complete-data and best imputed-data predictors,
//! empirical normal equations, and single-pass averaged SGD on imputed data.

use std::str::FromStr;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, Matrix, Vector};
use crate::missingness::check_rho;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CompleteBest,
    ImputedBestClosed,
    ImputedBestEmpirical,
    SgdAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub theta: Vector,
    pub provenance: Provenance,
}

impl LinearPredictor {
    fn checked(theta: Vector, provenance: Provenance) -> Result<Self> {
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "predictor coefficients" });
        }
        Ok(Self { theta, provenance })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vector> {
        if x.ncols() != self.theta.len() {
            return Err(Error::shape("predict", self.theta.len(), x.ncols()));
        }
        Ok(x * &self.theta)
    }
}

/// `theta* = (W^T)^† beta`: the (minimum-norm) minimizer of `|beta − W^T theta|^2`.
pub fn best_linear_complete(w: &Matrix, beta: &Vector) -> Result<LinearPredictor> {
    if w.ncols() != beta.len() {
        return Err(Error::shape("best_linear_complete", w.ncols(), beta.len()));
    }
    let theta = pseudo_inverse(&w.transpose())? * beta;
    LinearPredictor::checked(theta, Provenance::CompleteBest)
}

/// Population minimizer of the imputed risk given `W`.
///
/// Minimizes `R(rho theta) + rho (1 − rho) |theta|^2_{diag S}` with `S = W W^T`:
/// `theta_imp = u / rho` where `(S + lambda diag S) u = S theta* = W beta`.
pub fn best_linear_imputed_closed(w: &Matrix, beta: &Vector, rho: f64) -> Result<LinearPredictor> {
    check_rho(rho)?;
    if w.ncols() != beta.len() {
        return Err(Error::shape("best_linear_imputed_closed", w.ncols(), beta.len()));
    }
    if rho == 1.0 {
        let best = best_linear_complete(w, beta)?;
        return Ok(LinearPredictor { provenance: Provenance::ImputedBestClosed, ..best });
    }
    let lambda = (1.0 - rho) / rho;
    let mut system = w * w.transpose();
    for j in 0..system.nrows() {
        system[(j, j)] *= 1.0 + lambda;
    }
    let rhs = w * beta;
    let chol = Cholesky::new(system).ok_or(Error::Singular("imputed normal equations"))?;
    LinearPredictor::checked(chol.solve(&rhs) / rho, Provenance::ImputedBestClosed)
}

/// Best imputed linear predictor from population moments under MCAR:
/// solves `(rho^2 S + rho (1 − rho) diag S) theta = rho b`.
pub fn best_linear_imputed_from_moments(second_moment: &Matrix, cross: &Vector, rho: f64) -> Result<LinearPredictor> {
    check_rho(rho)?;
    let d = cross.len();
    if second_moment.shape() != (d, d) {
        return Err(Error::shape("best_linear_imputed_from_moments", d, second_moment.nrows()));
    }
    let mut system = second_moment * (rho * rho);
    for j in 0..d {
        system[(j, j)] += rho * (1.0 - rho) * second_moment[(j, j)];
    }
    let rhs = cross * rho;
    let theta = match Cholesky::new(system.clone()) {
        Some(chol) => chol.solve(&rhs),
        None => pseudo_inverse(&system)? * rhs,
    };
    LinearPredictor::checked(theta, Provenance::ImputedBestClosed)
}

/// Streaming accumulator for `X^T X` and `X^T Y`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    gram: Matrix,
    rhs: Vector,
    n: usize,
}

impl NormalEquations {
    pub fn new(d: usize) -> Self {
        Self {
            gram: Matrix::zeros(d, d),
            rhs: Vector::zeros(d),
            n: 0,
        }
    }

    /// Adds a block of rows.
    pub fn add_block(&mut self, x: &Matrix, y: &Vector) -> Result<()> {
        if x.ncols() != self.rhs.len() || x.nrows() != y.len() {
            return Err(Error::shape("NormalEquations::add_block", self.rhs.len(), x.ncols()));
        }
        // An explicit transpose lets `gemm` use the blocked kernel; `gemm_tr` does not.
        self.gram.gemm(1.0, &x.transpose(), x, 1.0);
        self.rhs.gemv_tr(1.0, x, y, 1.0);
        self.n += x.nrows();
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `(X^T X / n + eps I) theta = X^T Y / n`; the minimum-norm solution
    /// when `eps = 0` and the system is singular.
    pub fn solve(&self, ridge_eps: f64) -> Result<LinearPredictor> {
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one sample"));
        }
        if !(ridge_eps >= 0.0) {
            return Err(Error::invalid("ridge_eps", "must be nonnegative"));
        }
        let n = self.n as f64;
        let d = self.rhs.len();
        let system = &self.gram / n + Matrix::identity(d, d) * ridge_eps;
        let rhs = &self.rhs / n;
        let theta = if ridge_eps > 0.0 {
            Cholesky::new(system)
                .ok_or(Error::Singular("regularized normal equations"))?
                .solve(&rhs)
        } else {
            pseudo_inverse(&system)? * rhs
        };
        LinearPredictor::checked(theta, Provenance::ImputedBestEmpirical)
    }
}

/// Least-squares fit on imputed data via the empirical normal equations.
pub fn best_linear_imputed_empirical(x_tilde: &Matrix, y: &Vector, ridge_eps: f64) -> Result<LinearPredictor> {
    let mut ne = NormalEquations::new(x_tilde.ncols());
    ne.add_block(x_tilde, y)?;
    ne.solve(ridge_eps)
}

/// Step-size regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LowDim,
    HighDim,
    General,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low_dim" | "low-dim" => Ok(Regime::LowDim),
            "high_dim" | "high-dim" => Ok(Regime::HighDim),
            "general" => Ok(Regime::General),
            other => Err(Error::invalid("regime", format!("unknown regime `{other}` (low_dim, high_dim, general)"))),
        }
    }
}

/// `1/d` (low_dim), `1/(d sqrt n)` (high_dim), `1/(kappa d sqrt n)` (general).
pub fn step_size_policy(regime: Regime, d: usize, n: usize, kappa: f64) -> Result<f64> {
    if d == 0 || n == 0 {
        return Err(Error::invalid("step size", "d and n must be at least 1"));
    }
    let (d, sn) = (d as f64, (n as f64).sqrt());
    match regime {
        Regime::LowDim => Ok(1.0 / d),
        Regime::HighDim => Ok(1.0 / (d * sn)),
        Regime::General => {
            if !(kappa > 0.0) {
                return Err(Error::invalid("kappa", "must be positive"));
            }
            Ok(1.0 / (kappa * d * sn))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub gamma: f64,
    pub n: usize,
    pub regime: Regime,
    pub kappa: f64,
}

impl SgdConfig {
    /// Policy step size times `multiplier`.
    pub fn from_policy(regime: Regime, d: usize, n: usize, kappa: f64, multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0) {
            return Err(Error::invalid("gamma multiplier", "must be positive"));
        }
        Ok(Self {
            gamma: step_size_policy(regime, d, n, kappa)? * multiplier,
            n,
            regime,
            kappa,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdTrace {
    /// `(1/(n+1)) sum_{t=1..n} theta_t`.
    pub theta_bar: Vector,
    pub final_theta: Vector,
    /// `(t, theta_bar_t)` at the requested steps.
    pub checkpoints: Vec<(usize, Vector)>,
    pub steps: usize,
}

impl SgdTrace {
    pub fn predictor(&self) -> LinearPredictor {
        LinearPredictor {
            theta: self.theta_bar.clone(),
            provenance: Provenance::SgdAverage,
        }
    }
}

/// Norm growth factor over the first iterate that is treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Single pass of `theta_t = theta_{t−1} + gamma (y_t − x_t^T theta_{t−1}) x_t`
/// from `theta_0 = 0`, returning the average `(1/(n+1)) sum_{t=1..n} theta_t`.
///
/// `checkpoints` lists steps `t` at which `(1/(t+1)) sum_{s≤t} theta_s` is recorded.
pub fn sgd_imputed<I, X>(stream: I, d: usize, gamma: f64, checkpoints: &[usize]) -> Result<SgdTrace>
where
    I: IntoIterator<Item = (X, f64)>,
    X: AsRef<[f64]>,
{
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "step size must be positive and finite"));
    }
    let mut theta = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut scale = 1.0;
    let mut out = Vec::new();
    let mut next_cp = checkpoints.iter().copied().peekable();
    let mut t = 0usize;
    for (x, y) in stream {
        let x = x.as_ref();
        if x.len() != d {
            return Err(Error::shape("sgd_imputed", d, x.len()));
        }
        t += 1;
        let pred: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
        let g = gamma * (y - pred);
        for ((th, s), xi) in theta.iter_mut().zip(sum.iter_mut()).zip(x) {
            *th += g * xi;
            *s += *th;
        }
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if t == 1 {
            scale = norm.max(1.0);
        }
        if !norm.is_finite() || norm > DIVERGENCE_FACTOR * scale {
            return Err(Error::Divergence { step: t, norm });
        }
        while next_cp.peek().is_some_and(|&c| c <= t) {
            let c = next_cp.next().unwrap_or(t);
            if c == t {
                out.push((t, Vector::from_iterator(d, sum.iter().map(|s| s / (t as f64 + 1.0)))));
            }
        }
    }
    let denom = t as f64 + 1.0;
    Ok(SgdTrace {
        theta_bar: Vector::from_iterator(d, sum.iter().map(|s| s / denom)),
        final_theta: Vector::from_vec(theta),
        checkpoints: out,
        steps: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gaussian_rf, sample_latent, sample_output, sample_weights_sphere};
    use crate::linalg::{norm2, quadratic_form};
    use crate::missingness::{impute_zero, mcar_mask};
    use crate::risk::{risk_imputed_linear_given_w, risk_linear_given_w};
    use crate::rng::SeededRng;
    use approx::assert_relative_eq;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn e1(p: usize) -> Vector {
        Vector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn complete_best_identity_and_full_rank() {
        let beta = Vector::from_vec(vec![1.0, -2.0, 3.0]);
        let t = best_linear_complete(&Matrix::identity(3, 3), &beta).unwrap();
        assert_relative_eq!(t.theta, beta, epsilon = 1e-12);
        let w = sample_weights_sphere(4, 9, &mut SeededRng::new(31, 0));
        let beta = Vector::from_fn(4, |i, _| i as f64 + 0.5);
        let t = best_linear_complete(&w, &beta).unwrap();
        assert!(risk_linear_given_w(&t.theta, &w, &beta, 0.25).unwrap() - 0.25 < 1e-12);
    }

    #[test]
    fn complete_best_sigma_norm() {
        // E |theta*|^2_S = (d/p) |beta|^2 at p = 20, d = 8.
        let mut rng = SeededRng::new(32, 0);
        let beta = e1(20);
        let vals: Vec<f64> = (0..2000)
            .map(|_| {
                let w = sample_weights_sphere(20, 8, &mut rng);
                let t = best_linear_complete(&w, &beta).unwrap().theta;
                quadratic_form(&(&w * w.transpose()), &t)
            })
            .collect();
        let (m, se) = mean_se(&vals);
        assert!((m - 0.4).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn imputed_closed_rho_one_and_single_feature() {
        let mut rng = SeededRng::new(33, 0);
        let w = sample_weights_sphere(6, 4, &mut rng);
        let beta = Vector::from_fn(6, |i, _| (i as f64).cos());
        let a = best_linear_imputed_closed(&w, &beta, 1.0).unwrap().theta;
        let b = best_linear_complete(&w, &beta).unwrap().theta;
        assert_relative_eq!(a, b, epsilon = 1e-12);
        // d = 1: u = rho theta*, so theta_imp = theta*.
        let w1 = sample_weights_sphere(6, 1, &mut rng);
        let a = best_linear_imputed_closed(&w1, &beta, 0.3).unwrap().theta;
        let b = best_linear_complete(&w1, &beta).unwrap().theta;
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn imputed_closed_solves_imputed_normal_equations() {
        let mut rng = SeededRng::new(34, 0);
        for (p, d, rho) in [(10, 4, 0.7), (5, 20, 0.8), (30, 30, 0.5)] {
            let w = sample_weights_sphere(p, d, &mut rng);
            let beta = Vector::from_fn(p, |i, _| 1.0 / (i as f64 + 1.0));
            let theta = best_linear_imputed_closed(&w, &beta, rho).unwrap().theta;
            let s = &w * w.transpose();
            let mut s_imp = &s * (rho * rho);
            for j in 0..d {
                s_imp[(j, j)] += rho * (1.0 - rho) * s[(j, j)];
            }
            let resid = &s_imp * &theta - (&w * &beta) * rho;
            assert!(resid.norm() <= 1e-10, "residual {}", resid.norm());
            let via_moments = best_linear_imputed_from_moments(&s, &(&w * &beta), rho).unwrap().theta;
            assert_relative_eq!(theta, via_moments, epsilon = 1e-9);
        }
    }

    #[test]
    fn imputed_closed_is_first_order_optimal() {
        let mut rng = SeededRng::new(35, 0);
        let w = sample_weights_sphere(8, 12, &mut rng);
        let beta = Vector::from_fn(8, |i, _| (i as f64 * 0.3).sin() + 0.2);
        let theta = best_linear_imputed_closed(&w, &beta, 0.6).unwrap().theta;
        let base = risk_imputed_linear_given_w(&theta, &w, &beta, 0.1, 0.6).unwrap();
        let base_c = risk_linear_given_w(&best_linear_complete(&w, &beta).unwrap().theta, &w, &beta, 0.1).unwrap();
        let star = best_linear_complete(&w, &beta).unwrap().theta;
        for _ in 0..100 {
            let dir = crate::datagen::sample_weights_sphere(12, 1, &mut rng).row(0).transpose() * 1e-3;
            assert!(risk_imputed_linear_given_w(&(&theta + &dir), &w, &beta, 0.1, 0.6).unwrap() >= base);
            assert!(risk_linear_given_w(&(&star + &dir), &w, &beta, 0.1).unwrap() >= base_c);
        }
    }

    #[test]
    fn imputed_shrinks_in_sigma_metric() {
        let mut rng = SeededRng::new(36, 0);
        for _ in 0..20 {
            let w = sample_weights_sphere(15, 6, &mut rng);
            let beta = e1(15);
            let s = &w * w.transpose();
            let imp = best_linear_imputed_closed(&w, &beta, 0.7).unwrap().theta * 0.7;
            let star = best_linear_complete(&w, &beta).unwrap().theta;
            assert!(quadratic_form(&s, &imp) <= quadratic_form(&s, &star) + 1e-12);
        }
    }

    #[test]
    fn empirical_recovers_exact_fit() {
        let n = 8;
        // Orthonormal columns scaled by sqrt(n).
        let mut x = Matrix::zeros(n, 3);
        for j in 0..3 {
            x[(2 * j, j)] = (n as f64 / 2.0).sqrt();
            x[(2 * j + 1, j)] = (n as f64 / 2.0).sqrt();
        }
        let theta0 = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        let y = &x * &theta0;
        let t = best_linear_imputed_empirical(&x, &y, 0.0).unwrap();
        assert_relative_eq!(t.theta, theta0, epsilon = 1e-12);
    }

    #[test]
    fn empirical_rank_deficient_minimum_norm() {
        let x = Matrix::from_row_slice(4, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let y = Vector::from_vec(vec![1.0, 2.0, 0.5, -1.0]);
        let t = best_linear_imputed_empirical(&x, &y, 0.0).unwrap().theta;
        let resid = x.transpose() * (&x * &t) - x.transpose() * &y;
        assert!(resid.norm() <= 1e-8);
        // Minimum norm: no component along the null direction (1, -1, 0).
        assert!((t[0] - t[1]).abs() < 1e-10);
    }

    #[test]
    fn empirical_converges_to_closed_form() {
        let (n, p, d, rho) = (100_000, 6, 4, 0.7);
        let mut rng = SeededRng::new(37, 0);
        let w = sample_weights_sphere(p, d, &mut rng);
        let beta = e1(p);
        let z = sample_latent(n, p, &mut rng);
        let x = gaussian_rf(&z, &w).unwrap();
        let y = sample_output(&z, &beta, 0.0, &mut rng).unwrap();
        let mask = mcar_mask(n, d, rho, &mut rng).unwrap();
        let xt = impute_zero(&x, &mask).unwrap();
        let emp = best_linear_imputed_empirical(&xt, &y, 0.0).unwrap().theta;
        let closed = best_linear_imputed_closed(&w, &beta, rho).unwrap().theta;
        // Parametric scale: sqrt(residual variance * d / (n * lambda_min(S_imp))).
        let r = risk_imputed_linear_given_w(&closed, &w, &beta, 0.0, rho).unwrap();
        let tol = 3.0 * (r * d as f64 / (n as f64 * rho * (1.0 - rho) * 0.5)).sqrt();
        let err = (emp - closed).norm();
        assert!(err < tol, "{err} vs tol {tol}");
    }

    #[test]
    fn sgd_zero_inputs_stay_at_zero() {
        let stream = (0..50).map(|i| (vec![0.0; 3], i as f64));
        let tr = sgd_imputed(stream, 3, 0.7, &[]).unwrap();
        assert_eq!(tr.theta_bar, Vector::zeros(3));
        assert_eq!(tr.steps, 50);
    }

    #[test]
    fn sgd_single_step() {
        let tr = sgd_imputed([(vec![1.0, 2.0], 3.0)], 2, 0.5, &[1]).unwrap();
        assert_eq!(tr.final_theta.as_slice(), &[1.5, 3.0]);
        assert_eq!(tr.theta_bar.as_slice(), &[0.75, 1.5]);
        assert_eq!(tr.checkpoints, vec![(1, Vector::from_vec(vec![0.75, 1.5]))]);
    }

    #[test]
    fn sgd_matches_hand_unrolled_recursion() {
        let data = [([1.0, 0.5], 2.0), ([-0.3, 2.0], -1.0), ([0.7, 0.0], 0.5)];
        let gamma = 0.1;
        // Hand-unrolled:
        // t1: r = 2, theta = (0.2, 0.1)
        // t2: r = -1 - (-0.06 + 0.2) = -1.14, theta = (0.2 + 0.0342, 0.1 - 0.228) = (0.2342, -0.128)
        // t3: r = 0.5 - 0.16394 = 0.33606, theta = (0.2342 + 0.0235242, -0.128) = (0.2577242, -0.128)
        let t1 = [0.2, 0.1];
        let t2 = [0.2342, -0.128];
        let t3 = [0.2577242, -0.128];
        let bar = [(t1[0] + t2[0] + t3[0]) / 4.0, (t1[1] + t2[1] + t3[1]) / 4.0];
        let tr = sgd_imputed(data.iter().map(|(x, y)| (x.to_vec(), *y)), 2, gamma, &[2]).unwrap();
        assert!((tr.theta_bar[0] - bar[0]).abs() <= 1e-14);
        assert!((tr.theta_bar[1] - bar[1]).abs() <= 1e-14);
        assert!((tr.final_theta[0] - t3[0]).abs() <= 1e-14);
        let (t, cp) = &tr.checkpoints[0];
        assert_eq!(*t, 2);
        assert!((cp[0] - (t1[0] + t2[0]) / 3.0).abs() <= 1e-14);
    }

    #[test]
    fn sgd_is_deterministic() {
        let data: Vec<(Vec<f64>, f64)> = (0..200).map(|i| (vec![(i as f64).sin(), (i as f64 * 0.3).cos()], 1.0)).collect();
        let a = sgd_imputed(data.iter().map(|(x, y)| (x.as_slice(), *y)), 2, 0.3, &[]).unwrap();
        let b = sgd_imputed(data.iter().map(|(x, y)| (x.as_slice(), *y)), 2, 0.3, &[]).unwrap();
        assert_eq!(a.theta_bar, b.theta_bar);
    }

    #[test]
    fn sgd_detects_divergence() {
        let stream = (0..200).map(|_| (vec![3.0, 3.0], 1.0));
        assert!(matches!(sgd_imputed(stream, 2, 10.0, &[]), Err(Error::Divergence { .. })));
        assert!(sgd_imputed([(vec![1.0], 1.0)], 1, 0.0, &[]).is_err());
    }

    #[test]
    fn step_policies() {
        assert_relative_eq!(step_size_policy(Regime::LowDim, 10, 5, 1.0).unwrap(), 0.1);
        assert_relative_eq!(step_size_policy(Regime::HighDim, 100, 10_000, 1.0).unwrap(), 1e-4);
        assert_relative_eq!(step_size_policy(Regime::General, 100, 10_000, 2.0).unwrap(), 5e-5);
        assert!("medium".parse::<Regime>().is_err());
        assert_eq!("high_dim".parse::<Regime>().unwrap(), Regime::HighDim);
        let cfg = SgdConfig::from_policy(Regime::LowDim, 10, 100, 1.0, 1.0 / 6.0).unwrap();
        assert_relative_eq!(cfg.gamma, 1.0 / 60.0);
    }

    #[test]
    fn norm_vs_delta_inequality() {
        // rho (1 - rho) E |theta_imp|^2 <= Δ_miss + Δ_imp/miss = E[R_imp(theta_imp)] - E R*.
        let (p, d, rho) = (30, 10, 0.7);
        let mut rng = SeededRng::new(38, 0);
        let beta = e1(p);
        let mut diffs = Vec::new();
        for _ in 0..500 {
            let w = sample_weights_sphere(p, d, &mut rng);
            let t = best_linear_imputed_closed(&w, &beta, rho).unwrap().theta;
            let total = risk_imputed_linear_given_w(&t, &w, &beta, 0.0, rho).unwrap()
                - crate::risk::risk_complete_given_w(&w, &beta, 0.0).unwrap();
            diffs.push(total - rho * (1.0 - rho) * norm2(&t));
        }
        let (m, se) = mean_se(&diffs);
        assert!(m >= -3.0 * se);
    }
}
