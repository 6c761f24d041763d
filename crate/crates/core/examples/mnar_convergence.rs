//! Least squares on zero-imputed data under logistic MNAR masks; the held-out
//! risk approaches the noise level as the feature count grows.
//!
//! cargo run --example mnar_convergence

use rfimpute::datagen::{FeatureFamily, ModelSpec};
use rfimpute::missingness::{MaskDesign, MnarDesign};
use rfimpute::montecarlo::{mnar_convergence_experiment, ReplicationPlan};

fn main() -> rfimpute::Result<()> {
    let model = ModelSpec::with_beta_norm(10, 1, 0.0, 1.0, FeatureFamily::GaussianSphere)?;
    let design = MaskDesign::MnarLogistic(MnarDesign { intercept: MnarDesign::intercept_for_rate(0.8), slope_norm: 1.0 });
    let plan = ReplicationPlan { n_train: 20_000, n_test: 5_000, ..ReplicationPlan::new(3, 17) };
    let out = mnar_convergence_experiment(&model, &design, &[20, 80, 320], &plan)?;
    for r in &out.rows {
        println!("d = {:>4}: R_imp {:.5} +/- {:.5}", r.d, r.risk.mean, r.risk.stderr);
    }
    if let Some(t) = out.trend {
        println!("decreasing: {}, last/first: {:.3}, log-log slope: {:?}", t.decreasing, t.ratio_last_first, t.loglog_slope);
    }
    Ok(())
}
