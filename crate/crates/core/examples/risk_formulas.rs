//! Closed-form expected risks and bounds as functions of the feature count.
//!
//! cargo run --example risk_formulas

use rfimpute::risk::{
    delta_impmiss_bounds, delta_miss, delta_miss_sandwich, risk_complete_expected, risk_imputed_upper,
    risk_missing_expected, ImputationBounds, RiskParams,
};

fn main() -> rfimpute::Result<()> {
    let base = RiskParams::new(100, 1, 0.8, 0.0, 1.0)?;
    println!("{:>5} {:>10} {:>10} {:>12} {:>10}", "d", "E R*", "E R*_miss", "E R*_imp <=", "D_miss");
    for d in [10, 50, 90, 100, 150, 200, 400] {
        let rp = base.with_d(d);
        println!(
            "{d:>5} {:>10.5} {:>10.5} {:>12.5} {:>10.3e}",
            risk_complete_expected(&rp),
            risk_missing_expected(&rp),
            risk_imputed_upper(&rp)?,
            delta_miss(&rp)
        );
    }

    if let ImputationBounds::HighDim { total } = delta_impmiss_bounds(&base.with_d(400))? {
        println!("d = 400: {:.5} <= D_imp/miss + D_miss <= {:.5}", total.lower, total.upper);
    }

    let rp = RiskParams::new(2, 40, 0.8, 0.0, 1.0)?;
    let s = delta_miss_sandwich(&rp)?;
    println!("p = 2, d = 40: {:.3e} <= {:.3e} <= {:.3e}", s.lower, delta_miss(&rp), s.upper);
    Ok(())
}
