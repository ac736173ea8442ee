//! Counts trainable parameters for the full-size and desk-scale cascades.
//!
//!     cargo run --release --example parameter_audit

use joint_demosaick::cli::format_breakdown;
use joint_demosaick::{CascadeParams, ResDNetParams};

fn main() -> joint_demosaick::Result<()> {
    let full = CascadeParams::with_schedule(ResDNetParams::init(5, 64, 0)?, 10, 15.0, 1.0)?;
    println!("depth 5, 64 features, 10 steps");
    print!("{}", format_breakdown(&full.parameter_breakdown(), true));

    let desk = CascadeParams::with_schedule(ResDNetParams::init(1, 8, 0)?, 5, 15.0, 1.0)?;
    println!("\ndepth 1, 8 features, 5 steps");
    print!("{}", format_breakdown(&desk.parameter_breakdown(), false));
    Ok(())
}
