//! Pseudoinverse, row-space projector and the Frobenius moment of `W^+`.
//!
//! cargo run --example pseudo_inverse

use rfimpute::datagen::sample_weights_sphere;
use rfimpute::linalg::{frobenius_norm2, pseudo_inverse, row_space_projection, trace, Matrix};
use rfimpute::montecarlo::{MeanStderr, ReplicationPlan};
use rfimpute::risk::expected_pinv_frobenius;
use rfimpute::SeededRng;

fn main() -> rfimpute::Result<()> {
    let a = Matrix::from_row_slice(3, 5, &[1.0, 2.0, 0.0, -1.0, 3.0, 0.5, 0.0, 1.0, 1.0, -2.0, 1.5, 2.0, 1.0, 0.0, 1.0]);
    let a_pinv = pseudo_inverse(&a)?;
    println!("|A A+ A - A|_F = {:e}", (&a * &a_pinv * &a - &a).norm());

    let w = sample_weights_sphere(10, 4, &mut SeededRng::new(1, 0));
    let proj = row_space_projection(&w)?;
    println!("projector trace = {:.12}, |P^2 - P|_F = {:e}", trace(&proj), (&proj * &proj - &proj).norm());

    let (p, d) = (10, 5);
    let plan = ReplicationPlan::new(10_000, 7);
    let vals = plan.map(0, |_, mut rng| Ok(frobenius_norm2(&pseudo_inverse(&sample_weights_sphere(p, d, &mut rng))?)))?;
    let est = MeanStderr::from_values(&vals)?;
    println!(
        "E|W+|_F^2 at (p, d) = ({p}, {d}): {:.4} +/- {:.4}, closed form {}",
        est.mean,
        est.stderr,
        expected_pinv_frobenius(p, d)?
    );
    Ok(())
}
