//! Averaged SGD on zero-imputed features: one pass over a stream, then the
//! learning curve over several sample sizes.
//!
//! cargo run --example sgd_imputed

use rfimpute::datagen::{sample_weights_sphere, FeatureFamily, GaussianSampler, ModelSpec};
use rfimpute::estimators::{best_linear_imputed_closed, sgd_imputed, step_size_policy, Regime};
use rfimpute::montecarlo::{sgd_learning_curve, ReplicationPlan, SgdCurveSpec};
use rfimpute::risk::risk_imputed_linear_given_w;
use rfimpute::SeededRng;
use rand::Rng;

fn main() -> rfimpute::Result<()> {
    let (p, d, rho, n) = (40, 10, 0.7, 20_000);
    let model = ModelSpec::with_beta_norm(p, d, 0.2, 1.0, FeatureFamily::GaussianSphere)?;
    let mut rng = SeededRng::new(5, 0);
    let w = sample_weights_sphere(p, d, &mut rng);
    let sampler = GaussianSampler::new(w.clone(), model.beta_star.clone(), model.sigma)?;

    let mut mask_rng = rng.fork(1);
    let mut x = vec![0.0; d];
    let stream = (0..n).map(|_| {
        let y = sampler.sample_into(&mut rng, &mut x);
        let xt: Vec<f64> = x.iter().map(|v| if mask_rng.random::<f64>() < rho { *v } else { 0.0 }).collect();
        (xt, y)
    });
    let gamma = step_size_policy(Regime::LowDim, d, n, 1.0)?;
    let trace = sgd_imputed(stream, d, gamma, &[1_000, 10_000])?;
    let best = best_linear_imputed_closed(&w, &model.beta_star, rho)?;
    let sigma2 = model.sigma2();
    for (t, theta) in &trace.checkpoints {
        println!("t = {t:>6}: R_imp(theta_bar) = {:.5}", risk_imputed_linear_given_w(theta, &w, &model.beta_star, sigma2, rho)?);
    }
    println!("t = {n:>6}: R_imp(theta_bar) = {:.5}", risk_imputed_linear_given_w(&trace.theta_bar, &w, &model.beta_star, sigma2, rho)?);
    println!("best imputed risk    = {:.5}", risk_imputed_linear_given_w(&best.theta, &w, &model.beta_star, sigma2, rho)?);

    let spec = SgdCurveSpec { rho, n_grid: vec![100, 1_000, 10_000], regime: Regime::LowDim, kappa: 1.0, gamma_mult: 1.0 };
    for row in sgd_learning_curve(&model, &spec, &ReplicationPlan::new(20, 9))? {
        if let Some(e) = row.learning_error {
            println!("n = {:>6}: learning error {:.3e} +/- {:.1e}", row.n, e.mean, e.stderr);
        }
    }
    Ok(())
}
