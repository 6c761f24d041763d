//! Monte Carlo risk curves against the feature count next to their closed forms.
//!
//! cargo run --example figure1 -- [replicates]

use rfimpute::datagen::{FeatureFamily, ModelSpec};
use rfimpute::montecarlo::{risk_curves_vs_d, ReplicationPlan};

fn main() -> rfimpute::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let model = ModelSpec::with_beta_norm(100, 1, 0.0, 1.0, FeatureFamily::GaussianSphere)?;
    let grid = [10, 25, 50, 75, 95, 100, 120, 150, 200, 300, 400];
    let rows = risk_curves_vs_d(&grid, &model, 0.8, &ReplicationPlan::new(replicates, 2024), 4)?;
    println!("{:>4} {:>16} {:>16} {:>16} {:>8}", "d", "R* (exact)", "R*_miss (exact)", "R*_imp", "upper");
    for r in rows {
        println!(
            "{:>4} {:>7.4} ({:.4}) {:>7.4} ({:.4}) {:>8.4}+/-{:.4} {:>8}",
            r.d,
            r.complete.mean,
            r.complete_exact,
            r.miss.mean,
            r.miss_exact,
            r.imp.mean,
            r.imp.stderr,
            r.imp_upper.map_or("-".into(), |u| format!("{u:.4}"))
        );
    }
    Ok(())
}
