//! MCAR and logistic MNAR masks on Gaussian random features, then zero imputation.
//!
//! cargo run --example missingness

use rfimpute::datagen::{gaussian_rf, sample_latent, sample_output, sample_weights_sphere, ModelSpec, FeatureFamily};
use rfimpute::missingness::{MaskedDataset, MissingSpec, MnarDesign};
use rfimpute::rng::tags;
use rfimpute::SeededRng;

fn observed_rate(ds: &MaskedDataset) -> f64 {
    ds.mask.sum() / ds.mask.len() as f64
}

fn main() -> rfimpute::Result<()> {
    let (n, p, d) = (20_000, 5, 8);
    let model = ModelSpec::with_beta_norm(p, d, 0.1, 1.0, FeatureFamily::GaussianSphere)?;
    let rng = SeededRng::new(11, 0);
    let w = sample_weights_sphere(p, d, &mut rng.fork(tags::WEIGHTS));
    let z = sample_latent(n, p, &mut rng.fork(tags::LATENT));
    let x = gaussian_rf(&z, &w)?;
    let y = sample_output(&z, &model.beta_star, model.sigma, &mut rng.fork(tags::NOISE))?;

    let mcar = MaskedDataset::assemble(z.clone(), x.clone(), y.clone(), &MissingSpec::mcar(0.7)?, &mut rng.fork(tags::MASK))?;
    println!("MCAR rho = 0.7: observed fraction {:.4}", observed_rate(&mcar));

    let design = MnarDesign { intercept: MnarDesign::intercept_for_rate(0.7), slope_norm: 1.5 };
    let spec = design.sample(p, d, &mut rng.fork(tags::MISSING_PARAMS));
    let mnar = MaskedDataset::assemble(z, x, y, &spec, &mut rng.fork(tags::MASK))?;
    println!("logistic MNAR: observed fraction {:.4}", observed_rate(&mnar));
    // Missing entries are zero in the imputed design.
    let zeros = mnar.x_tilde.iter().zip(mnar.mask.iter()).filter(|(v, m)| **m == 0.0 && **v == 0.0).count();
    println!("imputed zeros where missing: {zeros} of {}", mnar.mask.iter().filter(|m| **m == 0.0).count());
    Ok(())
}
