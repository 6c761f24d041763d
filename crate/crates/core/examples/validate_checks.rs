//! Runs the oracle check suite and prints each outcome.
//!
//! cargo run --example validate_checks -- [check-to-perturb]

use rfimpute::experiments::run_validation;

fn main() -> rfimpute::Result<()> {
    let perturb = std::env::args().nth(1);
    let report = run_validation(20_240_501, perturb.as_deref())?;
    for c in &report.checks {
        println!(
            "{} {:<30} statistic {:>12.5e} tolerance {:>10.3e} reference {:>10.4} n = {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.statistic,
            c.tolerance,
            c.reference,
            c.replicates
        );
    }
    Ok(())
}
