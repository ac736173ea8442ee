//! Pretrains the denoiser, then trains the five-step cascade end to end
//! and compares it with bilinear interpolation on held-out scenes.
//!
//!     cargo run --release --example joint_training [noise_sigma] [model_out]

use joint_demosaick::cfa::{bilinear_demosaick, CfaPattern};
use joint_demosaick::dataset::synthetic_dataset;
use joint_demosaick::metrics::psnr_255;
use joint_demosaick::modelfile::save_model;
use joint_demosaick::noise::{noisy_observation, NoiseSpec};
use joint_demosaick::train::{pretrain_denoiser, train_joint, Phase, TrainConfig};
use joint_demosaick::{demosaick, Precision, ResDNetParams};

fn main() -> joint_demosaick::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let noise_sigma: f64 = args.next().map_or(0.0, |s| s.parse().expect("noise sigma"));
    let model_out = args.next();

    let data = synthetic_dataset(60, 96, 96, 11);
    let pre_cfg = TrainConfig {
        epochs: 10,
        crops_per_image: 4,
        ..TrainConfig::desk(Phase::Pretrain)
    };
    let init = ResDNetParams::init(pre_cfg.depth, pre_cfg.features, 0)?;
    let denoiser = pretrain_denoiser(&data, init, &pre_cfg)?.params;

    let cfg = TrainConfig {
        epochs: 20,
        crops_per_image: 4,
        noise_sigma,
        ..TrainConfig::desk(Phase::Joint)
    };
    let cascade = train_joint(&data, denoiser, &cfg)?.params;
    println!("learned w     {:?}", cascade.w);
    println!("learned sigma {:?}", cascade.sigmas);

    let pattern = CfaPattern::new(cfg.pattern);
    let (_, held_out) = data.split();
    let (mut base, mut ours) = (0.0, 0.0);
    for (i, clean) in held_out.images().enumerate() {
        let y = noisy_observation(clean, &pattern, &NoiseSpec::iid(noise_sigma, 77 + i as u64))?;
        base += psnr_255(&bilinear_demosaick(&y), clean)?;
        ours += psnr_255(&demosaick(&y, &cascade, Precision::F64)?, clean)?;
    }
    let n = held_out.len() as f64;
    println!("held-out mean PSNR: bilinear {:.2} dB, cascade {:.2} dB", base / n, ours / n);
    if let Some(path) = model_out {
        save_model(&cascade, &path)?;
        println!("saved {path}");
    }
    Ok(())
}
