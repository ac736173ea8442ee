//! Draws i.i.d. and signal-dependent noise and measures it.
//!
//!     cargo run --release --example sensor_noise

use joint_demosaick::cfa::make_pattern;
use joint_demosaick::noise::{add_noise, noisy_observation, NoiseSpec};
use joint_demosaick::ImageTensor;

fn empirical_std(clean: &ImageTensor, noisy: &ImageTensor) -> f64 {
    let d = noisy.sub(clean);
    (d.norm_sq() / d.len() as f64).sqrt()
}

fn main() -> joint_demosaick::Result<()> {
    let flat = ImageTensor::filled(256, 256, 3, 128.0);
    for sigma in [1.0, 5.0, 15.0] {
        let n = add_noise(&flat, &NoiseSpec::iid(sigma, 7))?;
        println!("iid sigma {sigma:>4}: measured {:.3}", empirical_std(&flat, &n));
    }

    // variance a·x + b: brighter pixels are noisier
    let spec = NoiseSpec::heteroscedastic(0.5, 4.0, 7);
    for level in [16.0, 64.0, 200.0] {
        let img = ImageTensor::filled(256, 256, 3, level);
        let n = add_noise(&img, &spec)?;
        println!(
            "shot/read at {level:>5}: expected {:.3} measured {:.3}",
            spec.std_at(level),
            empirical_std(&img, &n)
        );
    }

    let ramp = ImageTensor::from_fn(64, 64, 3, |_, c, _| 4.0 * c as f64);
    let y = noisy_observation(&ramp, &make_pattern("bayer_rggb")?, &spec)?;
    println!("observation records sigma = {:.3} (RMS over the image)", y.sigma());
    Ok(())
}
