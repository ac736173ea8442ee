//! Pretrains a small residual denoiser on generated scenes.
//!
//!     cargo run --release --example pretrain_denoiser [epochs]

use joint_demosaick::dataset::synthetic_dataset;
use joint_demosaick::metrics::psnr_255;
use joint_demosaick::noise::{add_noise, NoiseSpec};
use joint_demosaick::train::{pretrain_denoiser, Phase, TrainConfig};
use joint_demosaick::{denoise, Precision, ResDNetParams};

fn main() -> joint_demosaick::Result<()> {
    let epochs = std::env::args().nth(1).map_or(10, |s| s.parse().expect("epochs"));
    let data = synthetic_dataset(60, 96, 96, 11);
    let cfg = TrainConfig {
        epochs,
        crops_per_image: 4,
        ..TrainConfig::desk(Phase::Pretrain)
    };
    let init = ResDNetParams::init(cfg.depth, cfg.features, cfg.seed)?;
    let trained = pretrain_denoiser(&data, init, &cfg)?;
    println!("best validation step {} ({:.2} dB)", trained.best_step, trained.best_val_psnr);

    let (_, held_out) = data.split();
    let sigma = 15.0;
    for (i, (name, clean)) in held_out.entries().iter().enumerate().take(5) {
        let noisy = add_noise(clean, &NoiseSpec::iid(sigma, 1000 + i as u64))?;
        let out = denoise(&noisy, sigma, &trained.params, Precision::F64)?;
        println!(
            "{name}: noisy {:.2} dB -> denoised {:.2} dB",
            psnr_255(&noisy, clean)?,
            psnr_255(&out, clean)?
        );
    }
    Ok(())
}
