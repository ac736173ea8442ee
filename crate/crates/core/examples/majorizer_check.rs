//! The quadratic majorizer behind the cascade, checked numerically: it
//! upper-bounds the objective, touches it at the expansion point, and its
//! exact minimisation never increases the objective.
//!
//!     cargo run --release --example majorizer_check

use joint_demosaick::cfa::{make_pattern, mosaic};
use joint_demosaick::majorize::{mm_reference_iterate, objective_value, surrogate_value, QuadraticPrior};
use joint_demosaick::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> joint_demosaick::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random = |h, w| ImageTensor::from_fn(h, w, 3, |_, _, _| rng.random_range(0.0..255.0));
    let truth = random(4, 4);
    let y = mosaic(&truth, &make_pattern("bayer_rggb")?)?;
    let (sigma, prior) = (5.0, QuadraticPrior { lambda: 1e-3 });
    let x0 = random(4, 4);
    for alpha in [1.1, 2.0, 10.0] {
        let x = random(4, 4);
        let gap = surrogate_value(&x, &x0, &y, sigma, alpha, prior) - objective_value(&x, &y, sigma, prior);
        let touch = surrogate_value(&x0, &x0, &y, sigma, alpha, prior) - objective_value(&x0, &y, sigma, prior);
        println!("alpha {alpha:>4}: surrogate − objective = {gap:>12.4}  at x0: {touch:.1e}");
    }
    // below 1 the bound fails along any direction confined to sampled entries
    let p = y.pattern().clone();
    let x = ImageTensor::from_fn(4, 4, 3, |r, c, ch| x0.at(r, c, ch) + if p.samples(r, c, ch) { 10.0 } else { 0.0 });
    let gap = surrogate_value(&x, &x0, &y, sigma, 0.5, prior) - objective_value(&x, &y, sigma, prior);
    println!("alpha  0.5: surrogate − objective = {gap:>12.4}  (not a majorizer)");

    let iterates = mm_reference_iterate(&y, sigma, 2.0, prior.lambda, 30)?;
    let q: Vec<f64> = iterates.iter().map(|x| objective_value(x, &y, sigma, prior)).collect();
    println!("objective along MM iterates: {:.4} -> {:.4} -> … -> {:.4}", q[0], q[1], q[30]);
    assert!(q.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    Ok(())
}
