//! Observation masks (MCAR and logistic MNAR) and zero imputation.
//!
//! Masks use `1 = observed`. The response is never masked.

use rand::Rng;

use crate::datagen::sample_weights_sphere;
use crate::error::{Error, Result};
use crate::linalg::{hadamard, Matrix, Vector};
use crate::rng::SeededRng;

/// Missingness mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum MissingSpec {
    /// Each entry observed independently with probability `rho`.
    Mcar { rho: f64 },
    /// `P(P_j = 1 | Z) = 1 / (1 + exp(w0_j + wprime_j^T Z))`.
    MnarLogistic { w0: Vector, wprime: Matrix },
}

impl MissingSpec {
    pub fn mcar(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(MissingSpec::Mcar { rho })
    }

    /// Draws a mask for the latent rows of `z` and `d` features.
    pub fn sample_mask(&self, z: &Matrix, d: usize, rng: &mut SeededRng) -> Result<Matrix> {
        match self {
            MissingSpec::Mcar { rho } => mcar_mask(z.nrows(), d, *rho, rng),
            MissingSpec::MnarLogistic { w0, wprime } => {
                if w0.len() != d {
                    return Err(Error::shape("MissingSpec::sample_mask", d, w0.len()));
                }
                mnar_logistic_mask(z, w0, wprime, rng)
            }
        }
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("observation rate must lie in (0, 1], got {rho}")))
    }
}

/// `n x d` i.i.d. Bernoulli(`rho`) mask.
pub fn mcar_mask(n: usize, d: usize, rho: f64, rng: &mut SeededRng) -> Result<Matrix> {
    check_rho(rho)?;
    let mut p = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            if rng.random::<f64>() < rho {
                p[(i, j)] = 1.0;
            }
        }
    }
    Ok(p)
}

/// Logistic self-masking mask driven by the latent variables.
pub fn observation_probability(w0: f64, wprime_row: &[f64], z_row: &[f64]) -> f64 {
    let s: f64 = w0 + wprime_row.iter().zip(z_row).map(|(a, b)| a * b).sum::<f64>();
    1.0 / (1.0 + s.exp())
}

/// Mask with `P(P_ij = 1 | Z_i) = 1 / (1 + exp(w0_j + wprime_j^T Z_i))`,
/// conditionally independent across `j`.
pub fn mnar_logistic_mask(z: &Matrix, w0: &Vector, wprime: &Matrix, rng: &mut SeededRng) -> Result<Matrix> {
    let d = w0.len();
    if wprime.nrows() != d || wprime.ncols() != z.ncols() {
        return Err(Error::shape(
            "mnar_logistic_mask",
            format!("wprime {}x{}", d, z.ncols()),
            format!("{}x{}", wprime.nrows(), wprime.ncols()),
        ));
    }
    let n = z.nrows();
    let mut p = Matrix::zeros(n, d);
    let mut zrow = vec![0.0; z.ncols()];
    let mut wrow = vec![0.0; z.ncols()];
    for i in 0..n {
        for (k, v) in zrow.iter_mut().enumerate() {
            *v = z[(i, k)];
        }
        for j in 0..d {
            for (k, v) in wrow.iter_mut().enumerate() {
                *v = wprime[(j, k)];
            }
            if rng.random::<f64>() < observation_probability(w0[j], &wrow, &zrow) {
                p[(i, j)] = 1.0;
            }
        }
    }
    Ok(p)
}

/// `X_tilde = P ⊙ X`.
pub fn impute_zero(x: &Matrix, mask: &Matrix) -> Result<Matrix> {
    if !mask.iter().all(|&v| v == 0.0 || v == 1.0) {
        return Err(Error::invalid("mask", "entries must be exactly 0 or 1"));
    }
    hadamard(x, mask)
}

/// Random logistic MNAR parameters: every intercept equals `intercept` and
/// each slope `wprime_j` has norm `slope_norm` with a uniform direction.
///
/// `slope_norm = 0` is MCAR with `rho = 1 / (1 + e^intercept)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MnarDesign {
    pub intercept: f64,
    pub slope_norm: f64,
}

impl MnarDesign {
    pub fn sample(&self, p: usize, d: usize, rng: &mut SeededRng) -> MissingSpec {
        let w0 = Vector::from_element(d, self.intercept);
        let wprime = sample_weights_sphere(p, d, rng) * self.slope_norm;
        MissingSpec::MnarLogistic { w0, wprime }
    }

    /// Intercept giving marginal rate `rho` when the slopes vanish.
    pub fn intercept_for_rate(rho: f64) -> f64 {
        (1.0 / rho - 1.0).ln()
    }
}

/// Mechanism description independent of the feature count; realized into a
/// [`MissingSpec`] once `d` is known.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum MaskDesign {
    Mcar { rho: f64 },
    MnarLogistic(MnarDesign),
}

impl MaskDesign {
    pub fn realize(&self, p: usize, d: usize, rng: &mut SeededRng) -> Result<MissingSpec> {
        match self {
            MaskDesign::Mcar { rho } => MissingSpec::mcar(*rho),
            MaskDesign::MnarLogistic(design) => {
                if !design.intercept.is_finite() || !(design.slope_norm >= 0.0) || !design.slope_norm.is_finite() {
                    return Err(Error::invalid("mnar design", "intercept must be finite and slope norm nonnegative"));
                }
                Ok(design.sample(p, d, rng))
            }
        }
    }
}

/// A fully generated masked sample.
#[derive(Debug, Clone)]
pub struct MaskedDataset {
    pub z: Matrix,
    pub x: Matrix,
    pub mask: Matrix,
    pub x_tilde: Matrix,
    pub y: Vector,
}

impl MaskedDataset {
    /// Masks `x` under `spec` (using `z` for MNAR) and imputes by zero.
    pub fn assemble(z: Matrix, x: Matrix, y: Vector, spec: &MissingSpec, rng: &mut SeededRng) -> Result<Self> {
        if z.nrows() != x.nrows() || y.len() != x.nrows() {
            return Err(Error::shape("MaskedDataset", x.nrows(), format!("z: {}, y: {}", z.nrows(), y.len())));
        }
        let mask = spec.sample_mask(&z, x.ncols(), rng)?;
        let x_tilde = impute_zero(&x, &mask)?;
        Ok(Self { z, x, mask, x_tilde, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}
