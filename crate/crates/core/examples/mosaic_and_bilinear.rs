//! Mosaic a synthetic scene with each CFA layout and interpolate it back.
//!
//!     cargo run --release --example mosaic_and_bilinear [out_dir]

use joint_demosaick::cfa::{bilinear_demosaick, mosaic, CfaPattern, PatternKind};
use joint_demosaick::dataset::synthetic_image;
use joint_demosaick::imageio::write_image;
use joint_demosaick::metrics::psnr_255;

fn main() -> joint_demosaick::Result<()> {
    let out_dir = std::env::args().nth(1);
    let truth = synthetic_image(128, 128, 42);
    for kind in PatternKind::ALL {
        let pattern = CfaPattern::new(kind);
        let y = mosaic(&truth, &pattern)?;
        let x = bilinear_demosaick(&y);
        let [r, g, b] = pattern.channel_counts();
        println!(
            "{:<11} period {:?}  R/G/B per cell {r}/{g}/{b}  bilinear PSNR {:.2} dB",
            kind.name(),
            pattern.period(),
            psnr_255(&x, &truth)?
        );
        if let Some(dir) = &out_dir {
            write_image(format!("{dir}/{}_mosaic.ppm", kind.name()), y.data())?;
            write_image(format!("{dir}/{}_bilinear.ppm", kind.name()), &x)?;
        }
    }
    if let Some(dir) = &out_dir {
        write_image(format!("{dir}/truth.ppm"), &truth)?;
    }
    Ok(())
}
