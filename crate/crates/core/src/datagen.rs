//! Samplers for the random-feature generative model.
//!
//! Latent `Z ~ N(0, I_p)`; features are either Gaussian random features
//! `X_j = Z^T W_j` with `W_j` uniform on the unit sphere, or Fourier features
//! `X_j = cos(A_j^T Z + B_j) + 2 C_j`. Responses are `Y = Z^T beta* + eps`
//! (linear target) or `Y = f*(Z) + eps` for a general regression function.

use std::f64::consts::PI;

use nalgebra::QR;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, ensure_finite, norm2, Matrix, Vector};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    GaussianSphere,
    Fourier,
}

/// Generative model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub p: usize,
    pub d: usize,
    pub sigma: f64,
    pub beta_star: Vector,
    pub feature_family: FeatureFamily,
}

impl ModelSpec {
    pub fn new(p: usize, d: usize, sigma: f64, beta_star: Vector, feature_family: FeatureFamily) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("p", "latent dimension must be at least 1"));
        }
        if d == 0 {
            return Err(Error::invalid("d", "feature count must be at least 1"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma", "must be finite and nonnegative"));
        }
        if beta_star.len() != p {
            return Err(Error::shape("ModelSpec", p, beta_star.len()));
        }
        if !beta_star.iter().all(|b| b.is_finite()) {
            return Err(Error::NonFinite { what: "beta_star" });
        }
        Ok(Self {
            p,
            d,
            sigma,
            beta_star,
            feature_family,
        })
    }

    /// `beta* = norm * e_1`.
    pub fn with_beta_norm(p: usize, d: usize, sigma: f64, norm: f64, feature_family: FeatureFamily) -> Result<Self> {
        let beta = BetaSpec::Norm { norm }.expand(p)?;
        Self::new(p, d, sigma, beta, feature_family)
    }

    pub fn with_d(&self, d: usize) -> Result<Self> {
        Self::new(self.p, d, self.sigma, self.beta_star.clone(), self.feature_family)
    }

    pub fn beta_norm2(&self) -> f64 {
        norm2(&self.beta_star)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Signal configuration: an explicit vector, or a norm expanded along `e_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Explicit(Vec<f64>),
    Norm { norm: f64 },
}

impl BetaSpec {
    pub fn expand(&self, p: usize) -> Result<Vector> {
        match self {
            BetaSpec::Explicit(v) => {
                if v.len() != p {
                    return Err(Error::shape("beta_star", p, v.len()));
                }
                Ok(Vector::from_column_slice(v))
            }
            BetaSpec::Norm { norm } => {
                if !(*norm >= 0.0) || !norm.is_finite() {
                    return Err(Error::invalid("beta norm", "must be finite and nonnegative"));
                }
                if p == 0 {
                    return Err(Error::invalid("p", "latent dimension must be at least 1"));
                }
                let mut v = Vector::zeros(p);
                v[0] = *norm;
                Ok(v)
            }
        }
    }
}

fn standard_normal(rng: &mut SeededRng) -> f64 {
    rng.sample(StandardNormal)
}

/// `d x p` matrix whose rows are i.i.d. uniform on the unit sphere of `R^p`
/// (normalized Gaussian vectors).
pub fn sample_weights_sphere(p: usize, d: usize, rng: &mut SeededRng) -> Matrix {
    let mut w = Matrix::zeros(d, p);
    let mut row = vec![0.0; p];
    for j in 0..d {
        loop {
            for v in row.iter_mut() {
                *v = standard_normal(rng);
            }
            let n = compensated_sum(row.iter().map(|x| x * x)).sqrt();
            if n > 0.0 {
                for (k, v) in row.iter().enumerate() {
                    w[(j, k)] = v / n;
                }
                break;
            }
        }
    }
    w
}

/// `n x p` matrix of independent standard normals, filled row by row.
pub fn sample_latent(n: usize, p: usize, rng: &mut SeededRng) -> Matrix {
    let mut z = Matrix::zeros(n, p);
    for i in 0..n {
        for k in 0..p {
            z[(i, k)] = standard_normal(rng);
        }
    }
    z
}

/// `X = Z W^T`.
pub fn gaussian_rf(z: &Matrix, w: &Matrix) -> Result<Matrix> {
    if z.ncols() != w.ncols() {
        return Err(Error::shape("gaussian_rf", format!("latent dim {}", w.ncols()), format!("latent dim {}", z.ncols())));
    }
    Ok(z * w.transpose())
}

/// Fourier feature parameters `(A_j, B_j, C_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierWeights {
    /// `d x p`, standard normal entries.
    pub a: Matrix,
    /// Phases in `[0, 2 pi)`.
    pub b: Vector,
    /// Signs, exactly `+1` or `-1`.
    pub c: Vector,
}

impl FourierWeights {
    pub fn new(a: Matrix, b: Vector, c: Vector) -> Result<Self> {
        let d = a.nrows();
        if b.len() != d || c.len() != d {
            return Err(Error::shape("FourierWeights", d, format!("b: {}, c: {}", b.len(), c.len())));
        }
        ensure_finite(&a, "fourier A")?;
        if !c.iter().all(|&s| s == 1.0 || s == -1.0) {
            return Err(Error::invalid("c", "signs must be exactly +1 or -1"));
        }
        if !b.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { what: "fourier B" });
        }
        Ok(Self { a, b, c })
    }

    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// `psi(z, W_j)`.
    pub fn feature(&self, j: usize, z: &[f64]) -> f64 {
        let arg = crate::linalg::dot(self.a.row(j).transpose().as_slice(), z) + self.b[j];
        arg.cos() + 2.0 * self.c[j]
    }

    /// `E[psi(Z, W_j)]` for `Z ~ N(0, I)`.
    pub fn mean(&self) -> Vector {
        Vector::from_fn(self.d(), |j, _| {
            let a2 = self.a.row(j).norm_squared();
            self.b[j].cos() * (-0.5 * a2).exp() + 2.0 * self.c[j]
        })
    }

    /// Second-moment matrix `E[psi psi^T | W]` for `Z ~ N(0, I)`.
    pub fn second_moment(&self) -> Matrix {
        let d = self.d();
        let p = self.p();
        let mean_cos: Vec<f64> = (0..d)
            .map(|j| self.b[j].cos() * (-0.5 * self.a.row(j).norm_squared()).exp())
            .collect();
        let mut m = Matrix::zeros(d, d);
        for j in 0..d {
            for k in 0..=j {
                let mut minus = 0.0;
                let mut plus = 0.0;
                for l in 0..p {
                    let (x, y) = (self.a[(j, l)], self.a[(k, l)]);
                    minus += (x - y) * (x - y);
                    plus += (x + y) * (x + y);
                }
                // E[cos u_j cos u_k] = (cos(B_j - B_k) e^{-|A_j - A_k|^2/2} + cos(B_j + B_k) e^{-|A_j + A_k|^2/2}) / 2
                let cc = 0.5
                    * ((self.b[j] - self.b[k]).cos() * (-0.5 * minus).exp()
                        + (self.b[j] + self.b[k]).cos() * (-0.5 * plus).exp());
                let v = cc
                    + 2.0 * self.c[k] * mean_cos[j]
                    + 2.0 * self.c[j] * mean_cos[k]
                    + 4.0 * self.c[j] * self.c[k];
                m[(j, k)] = v;
                m[(k, j)] = v;
            }
        }
        m
    }
}

pub fn sample_fourier_weights(p: usize, d: usize, rng: &mut SeededRng) -> FourierWeights {
    let mut a = Matrix::zeros(d, p);
    let mut b = Vector::zeros(d);
    let mut c = Vector::zeros(d);
    for j in 0..d {
        for k in 0..p {
            a[(j, k)] = standard_normal(rng);
        }
        b[j] = rng.random_range(0.0..2.0 * PI);
        c[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    FourierWeights { a, b, c }
}

/// `X_ij = cos(A_j^T Z_i + B_j) + 2 C_j`.
pub fn fourier_rf(z: &Matrix, fw: &FourierWeights) -> Result<Matrix> {
    if z.ncols() != fw.p() {
        return Err(Error::shape("fourier_rf", format!("latent dim {}", fw.p()), format!("latent dim {}", z.ncols())));
    }
    let mut x = z * fw.a.transpose();
    for j in 0..fw.d() {
        let (b, c) = (fw.b[j], fw.c[j]);
        for v in x.column_mut(j).iter_mut() {
            *v = (*v + b).cos() + 2.0 * c;
        }
    }
    Ok(x)
}

/// `Y_i = Z_i^T beta* + eps_i` with `eps_i ~ N(0, sigma^2)`.
pub fn sample_output(z: &Matrix, beta_star: &Vector, sigma: f64, rng: &mut SeededRng) -> Result<Vector> {
    if z.ncols() != beta_star.len() {
        return Err(Error::shape("sample_output", z.ncols(), beta_star.len()));
    }
    let clean = z * beta_star;
    sample_output_general(&clean, sigma, rng)
}

/// Adds independent `N(0, sigma^2)` noise to regression-function values.
pub fn sample_output_general(fstar_values: &Vector, sigma: f64, rng: &mut SeededRng) -> Result<Vector> {
    if !fstar_values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { what: "regression function values" });
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be nonnegative"));
    }
    Ok(fstar_values.map(|f| f + sigma * standard_normal(rng)))
}

/// Exact-in-law sampler of `(X, Y)` for Gaussian random features with fixed `W`.
///
/// `(W Z, beta^T Z)` only depends on `Z` through its projection on the span of
/// the rows of `W` and `beta`. When `d + 1 < p` the sampler draws that
/// projection directly through a thin QR factorization, which keeps per-sample
/// cost at `O(d^2)` instead of `O(dp)`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    w: Matrix,
    beta: Vector,
    sigma: f64,
    reduced: Option<Matrix>,
}

impl GaussianSampler {
    pub fn new(w: Matrix, beta: Vector, sigma: f64) -> Result<Self> {
        if w.ncols() != beta.len() {
            return Err(Error::shape("GaussianSampler", w.ncols(), beta.len()));
        }
        let (d, p) = w.shape();
        let reduced = if d + 1 < p {
            let mut stacked = Matrix::zeros(p, d + 1);
            stacked.columns_mut(0, d).copy_from(&w.transpose());
            stacked.set_column(d, &beta);
            // [W; beta^T] Z = R^T Q^T Z and Q^T Z ~ N(0, I_{d+1}).
            let r = QR::new(stacked).r();
            Some(r.transpose())
        } else {
            None
        };
        Ok(Self { w, beta, sigma, reduced })
    }

    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    /// Draws one complete sample; writes features into `x`, returns `y`.
    pub fn sample_into(&self, rng: &mut SeededRng, x: &mut [f64]) -> f64 {
        let d = self.d();
        let clean = match &self.reduced {
            Some(l) => {
                let g = Vector::from_fn(d + 1, |_, _| standard_normal(rng));
                let v = l * g;
                x.copy_from_slice(&v.as_slice()[..d]);
                v[d]
            }
            None => {
                let z = Vector::from_fn(self.w.ncols(), |_, _| standard_normal(rng));
                let v = &self.w * &z;
                x.copy_from_slice(v.as_slice());
                self.beta.dot(&z)
            }
        };
        clean + self.sigma * standard_normal(rng)
    }
}

/// Regression function `f*(z) = sum_k c_k exp(-|z - u_k|^2 / 2)`.
///
/// Each bump is exactly representable by the Fourier features: the weight
/// function `alpha(A, B, C) = 2 cos(B + A^T u)` integrates against
/// `cos(A^T z + B) + 2C` to `exp(-|z - u|^2 / 2)`, so the target lies in the
/// infinite-feature function class with a finite norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTarget {
    /// Rows are bump centers `u_k`.
    pub centers: Vec<Vec<f64>>,
    pub coefs: Vec<f64>,
}

impl BumpTarget {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.centers.is_empty() || self.centers.len() != self.coefs.len() {
            return Err(Error::invalid("target", "need one coefficient per center and at least one center"));
        }
        if self.centers.iter().any(|c| c.len() != p) {
            return Err(Error::shape("target centers", p, "mismatched center length"));
        }
        Ok(())
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        compensated_sum(self.centers.iter().zip(&self.coefs).map(|(u, c)| {
            let dist2: f64 = u.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            c * (-0.5 * dist2).exp()
        }))
    }

    pub fn eval_rows(&self, z: &Matrix) -> Vector {
        let mut row = vec![0.0; z.ncols()];
        Vector::from_fn(z.nrows(), |i, _| {
            for (k, v) in row.iter_mut().enumerate() {
                *v = z[(i, k)];
            }
            self.eval(&row)
        })
    }

    /// `E[f*(Z)^2]`.
    pub fn second_moment(&self) -> f64 {
        let p = self.centers[0].len() as f64;
        let mut terms = Vec::new();
        for (u, cu) in self.centers.iter().zip(&self.coefs) {
            for (v, cv) in self.centers.iter().zip(&self.coefs) {
                let sum2: f64 = u.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum();
                let u2: f64 = u.iter().map(|a| a * a).sum();
                let v2: f64 = v.iter().map(|a| a * a).sum();
                terms.push(cu * cv * 3f64.powf(-p / 2.0) * (sum2 / 6.0 - 0.5 * (u2 + v2)).exp());
            }
        }
        compensated_sum(terms)
    }

    /// `E[psi(Z, W_j) f*(Z)]` for each Fourier feature.
    pub fn feature_cross_moment(&self, fw: &FourierWeights) -> Vector {
        let p = fw.p() as f64;
        let half_p = 2f64.powf(-p / 2.0);
        Vector::from_fn(fw.d(), |j, _| {
            let a = fw.a.row(j);
            let a2 = a.norm_squared();
            compensated_sum(self.centers.iter().zip(&self.coefs).map(|(u, c)| {
                let u2: f64 = u.iter().map(|x| x * x).sum();
                let au: f64 = a.iter().zip(u).map(|(x, y)| x * y).sum();
                let bump_mean = half_p * (-0.25 * u2).exp();
                let cos_term = bump_mean * (-0.25 * a2).exp() * (0.5 * au + fw.b[j]).cos();
                c * (cos_term + 2.0 * fw.c[j] * bump_mean)
            }))
        })
    }

    /// `E|alpha(W)|^2` for the representing weight function; an upper bound on
    /// the squared infinite-feature norm of the target.
    pub fn nu_norm2_upper(&self) -> f64 {
        let mut terms = Vec::new();
        for (u, cu) in self.centers.iter().zip(&self.coefs) {
            for (v, cv) in self.centers.iter().zip(&self.coefs) {
                let dist2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                terms.push(2.0 * cu * cv * (-0.5 * dist2).exp());
            }
        }
        compensated_sum(terms)
    }
}

/// Almost-sure bound on `psi^2` for Fourier features: `(1 + 2)^2`.
pub const FOURIER_FEATURE_SUP2: f64 = 9.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pseudo_inverse, frobenius_norm2};

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn sphere_rows_unit_norm() {
        let mut rng = SeededRng::new(1, 0);
        let w = sample_weights_sphere(7, 30, &mut rng);
        for row in w.row_iter() {
            assert!((row.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sphere_in_one_dimension_is_signs() {
        let mut rng = SeededRng::new(2, 0);
        let w = sample_weights_sphere(1, 50, &mut rng);
        assert!(w.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn pinv_frobenius_moment() {
        // Oracle: d (1 + (d - 1) / (p - d - 1)) = 10 for p = 10, d = 5.
        let mut rng = SeededRng::new(3, 0);
        let vals: Vec<f64> = (0..4000)
            .map(|_| frobenius_norm2(&pseudo_inverse(&sample_weights_sphere(10, 5, &mut rng)).unwrap()))
            .collect();
        let (m, se) = mean_se(&vals);
        assert!((m - 10.0).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn latent_is_deterministic_and_standard() {
        let z1 = sample_latent(20_000, 3, &mut SeededRng::new(4, 0));
        let z2 = sample_latent(20_000, 3, &mut SeededRng::new(4, 0));
        assert_eq!(z1, z2);
        let n = z1.nrows() as f64;
        for a in 0..3 {
            let col: Vec<f64> = z1.column(a).iter().copied().collect();
            let (m, se) = mean_se(&col);
            assert!(m.abs() < 3.0 * se);
            for b in 0..3 {
                let prods: Vec<f64> = (0..z1.nrows()).map(|i| z1[(i, a)] * z1[(i, b)]).collect();
                let (c, se) = mean_se(&prods);
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 3.0 * se + 1.0 / n, "cov[{a},{b}] = {c}");
            }
        }
    }

    #[test]
    fn gaussian_rf_identity_and_zero() {
        let z = sample_latent(5, 4, &mut SeededRng::new(5, 0));
        assert_eq!(gaussian_rf(&z, &Matrix::identity(4, 4)).unwrap(), z);
        let w = sample_weights_sphere(4, 3, &mut SeededRng::new(6, 0));
        assert_eq!(gaussian_rf(&Matrix::zeros(5, 4), &w).unwrap(), Matrix::zeros(5, 3));
        assert!(gaussian_rf(&z, &Matrix::zeros(3, 5)).is_err());
    }

    #[test]
    fn gaussian_rf_covariance_is_gram() {
        let w = sample_weights_sphere(4, 3, &mut SeededRng::new(7, 0));
        let z = sample_latent(40_000, 4, &mut SeededRng::new(7, 1));
        let x = gaussian_rf(&z, &w).unwrap();
        let gram = &w * w.transpose();
        for a in 0..3 {
            for b in 0..3 {
                let prods: Vec<f64> = (0..x.nrows()).map(|i| x[(i, a)] * x[(i, b)]).collect();
                let (m, se) = mean_se(&prods);
                assert!((m - gram[(a, b)]).abs() < 3.5 * se, "({a},{b}) {m} vs {}", gram[(a, b)]);
            }
        }
    }

    #[test]
    fn fourier_constant_columns() {
        let a = Matrix::zeros(2, 3);
        let b = Vector::from_vec(vec![0.0, PI / 2.0]);
        let c = Vector::from_vec(vec![1.0, -1.0]);
        let fw = FourierWeights::new(a, b, c).unwrap();
        let z = sample_latent(4, 3, &mut SeededRng::new(8, 0));
        let x = fourier_rf(&z, &fw).unwrap();
        for i in 0..4 {
            assert!((x[(i, 0)] - 3.0).abs() < 1e-15);
            assert!((x[(i, 1)] + 2.0).abs() < 1e-15);
        }
        assert!(FourierWeights::new(Matrix::zeros(1, 1), Vector::zeros(1), Vector::from_element(1, 0.5)).is_err());
    }

    #[test]
    fn fourier_entries_bounded() {
        let mut rng = SeededRng::new(9, 0);
        let fw = sample_fourier_weights(3, 40, &mut rng);
        assert!(fw.b.iter().all(|&b| (0.0..2.0 * PI).contains(&b)));
        let z = sample_latent(200, 3, &mut rng);
        let x = fourier_rf(&z, &fw).unwrap();
        assert!(x.iter().all(|v| v.abs() <= 3.0));
    }

    #[test]
    fn fourier_second_moment_diagonal_matches_monte_carlo() {
        // Oracle: 1/2 + cos(2B) e^{-2|A|^2}/2 + 4 C cos(B) e^{-|A|^2/2} + 4.
        let mut rng = SeededRng::new(10, 0);
        let mut fw = sample_fourier_weights(2, 4, &mut rng);
        fw.a *= 0.4;
        let z = sample_latent(100_000, 2, &mut rng);
        let x = fourier_rf(&z, &fw).unwrap();
        let closed = fw.second_moment();
        for j in 0..4 {
            let a2 = fw.a.row(j).norm_squared();
            let (b, c) = (fw.b[j], fw.c[j]);
            let oracle = 0.5 + 0.5 * (2.0 * b).cos() * (-2.0 * a2).exp() + 4.0 * c * b.cos() * (-0.5 * a2).exp() + 4.0;
            assert!((closed[(j, j)] - oracle).abs() < 1e-12);
            let sq: Vec<f64> = x.column(j).iter().map(|v| v * v).collect();
            let (m, se) = mean_se(&sq);
            assert!((m - oracle).abs() < 3.0 * se, "j={j}: {m} vs {oracle} (se {se})");
        }
        // Off-diagonal entries against sample averages.
        for j in 0..4 {
            for k in 0..j {
                let prods: Vec<f64> = (0..x.nrows()).map(|i| x[(i, j)] * x[(i, k)]).collect();
                let (m, se) = mean_se(&prods);
                assert!((m - closed[(j, k)]).abs() < 3.5 * se);
            }
        }
    }

    #[test]
    fn output_noiseless_and_noise_variance() {
        let mut rng = SeededRng::new(11, 0);
        let z = sample_latent(50, 3, &mut rng);
        let beta = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(sample_output(&z, &beta, 0.0, &mut rng).unwrap(), &z * &beta);

        let z = sample_latent(50_000, 3, &mut rng);
        let y = sample_output(&z, &Vector::zeros(3), 0.7, &mut rng).unwrap();
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 0.49).abs() < 3.0 * se);

        let y = sample_output(&z, &beta, 0.7, &mut rng).unwrap();
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - (0.49 + 5.25)).abs() < 3.0 * se);
    }

    #[test]
    fn general_output() {
        let f = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let mut rng = SeededRng::new(12, 0);
        assert_eq!(sample_output_general(&f, 0.0, &mut rng).unwrap(), f);
        let a = sample_output_general(&f, 1.0, &mut SeededRng::new(12, 5)).unwrap();
        let b = sample_output_general(&f, 1.0, &mut SeededRng::new(12, 5)).unwrap();
        assert_eq!(a, b);
        let zeros = Vector::zeros(60_000);
        let y = sample_output_general(&zeros, 1.5, &mut rng).unwrap();
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 2.25).abs() < 3.0 * se);
        assert!(sample_output_general(&Vector::from_element(1, f64::NAN), 1.0, &mut rng).is_err());
    }

    #[test]
    fn beta_spec_norm_shorthand() {
        let m = ModelSpec::with_beta_norm(4, 2, 0.0, 2.0, FeatureFamily::GaussianSphere).unwrap();
        assert_eq!(m.beta_star.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.beta_norm2(), 4.0);
        assert!(BetaSpec::Explicit(vec![1.0]).expand(2).is_err());
        assert!(ModelSpec::with_beta_norm(0, 2, 0.0, 1.0, FeatureFamily::GaussianSphere).is_err());
        assert!(ModelSpec::with_beta_norm(2, 2, -1.0, 1.0, FeatureFamily::GaussianSphere).is_err());
    }

    #[test]
    fn reduced_sampler_matches_moments() {
        // Second moments of (X, Y) must be [W W^T, W beta; beta^T W^T, |beta|^2 + sigma^2].
        let mut rng = SeededRng::new(13, 0);
        let w = sample_weights_sphere(12, 3, &mut rng);
        let beta = Vector::from_fn(12, |i, _| if i < 2 { 1.0 } else { 0.0 });
        let sampler = GaussianSampler::new(w.clone(), beta.clone(), 0.5).unwrap();
        assert!(sampler.reduced.is_some());
        let n = 60_000;
        let mut xs = Matrix::zeros(n, 3);
        let mut ys = vec![0.0; n];
        let mut x = vec![0.0; 3];
        for i in 0..n {
            ys[i] = sampler.sample_into(&mut rng, &mut x);
            for j in 0..3 {
                xs[(i, j)] = x[j];
            }
        }
        let gram = &w * w.transpose();
        let cross = &w * &beta;
        for a in 0..3 {
            for b in 0..3 {
                let prods: Vec<f64> = (0..n).map(|i| xs[(i, a)] * xs[(i, b)]).collect();
                let (m, se) = mean_se(&prods);
                assert!((m - gram[(a, b)]).abs() < 3.5 * se);
            }
            let prods: Vec<f64> = (0..n).map(|i| xs[(i, a)] * ys[i]).collect();
            let (m, se) = mean_se(&prods);
            assert!((m - cross[a]).abs() < 3.5 * se);
        }
        let sq: Vec<f64> = ys.iter().map(|v| v * v).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - 2.25).abs() < 3.5 * se);
    }

    #[test]
    fn bump_target_moments() {
        let target = BumpTarget {
            centers: vec![vec![0.5, -0.3], vec![-0.8, 0.2]],
            coefs: vec![1.5, -0.7],
        };
        let mut rng = SeededRng::new(14, 0);
        let fw = sample_fourier_weights(2, 3, &mut rng);
        let z = sample_latent(100_000, 2, &mut rng);
        let f = target.eval_rows(&z);
        let x = fourier_rf(&z, &fw).unwrap();
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        let (m, se) = mean_se(&sq);
        assert!((m - target.second_moment()).abs() < 3.0 * se);
        let cross = target.feature_cross_moment(&fw);
        for j in 0..3 {
            let prods: Vec<f64> = (0..z.nrows()).map(|i| x[(i, j)] * f[i]).collect();
            let (m, se) = mean_se(&prods);
            assert!((m - cross[j]).abs() < 3.5 * se, "j={j}: {m} vs {}", cross[j]);
        }
    }

    #[test]
    fn bump_is_an_average_of_fourier_features() {
        // f*(z) = E_W[alpha(W) psi(z, W)] with alpha = 2 cos(B + A^T u).
        let target = BumpTarget { centers: vec![vec![0.4, -0.2]], coefs: vec![1.0] };
        let z = [0.3, 0.1];
        let mut rng = SeededRng::new(15, 0);
        let fw = sample_fourier_weights(2, 200_000, &mut rng);
        let vals: Vec<f64> = (0..fw.d())
            .map(|j| {
                let au = fw.a[(j, 0)] * 0.4 + fw.a[(j, 1)] * -0.2;
                2.0 * (fw.b[j] + au).cos() * fw.feature(j, &z)
            })
            .collect();
        let (m, se) = mean_se(&vals);
        assert!((m - target.eval(&z)).abs() < 3.0 * se);
        let alpha2: Vec<f64> = (0..fw.d())
            .map(|j| {
                let au = fw.a[(j, 0)] * 0.4 + fw.a[(j, 1)] * -0.2;
                4.0 * (fw.b[j] + au).cos().powi(2)
            })
            .collect();
        let (m, se) = mean_se(&alpha2);
        assert!((m - target.nu_norm2_upper()).abs() < 3.0 * se);
    }
}
