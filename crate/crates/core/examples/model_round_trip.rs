//! Saves a cascade, reads it back, and shows what a damaged file reports.
//!
//!     cargo run --release --example model_round_trip

use joint_demosaick::modelfile::{decode, encode_cascade};
use joint_demosaick::{CascadeParams, ResDNetParams};

fn main() -> joint_demosaick::Result<()> {
    let params = CascadeParams::with_schedule(ResDNetParams::init(2, 16, 9)?, 6, 15.0, 1.0)?;
    let bytes = encode_cascade(&params);
    println!("{} bytes, {} scalars", bytes.len(), params.num_scalars());

    let back = decode(&bytes)?.into_cascade()?;
    let worst = params
        .arrays()
        .iter()
        .zip(back.arrays())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    println!("largest change after the 32-bit round trip: {worst:.3e}");
    assert_eq!(encode_cascade(&back), bytes);

    let mut damaged = bytes.clone();
    damaged[4] = 2;
    println!("bad version: {}", decode(&damaged).unwrap_err());
    println!("truncated:   {}", decode(&bytes[..bytes.len() / 2]).unwrap_err());
    Ok(())
}
