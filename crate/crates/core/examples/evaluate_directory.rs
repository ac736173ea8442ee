//! Writes a small evaluation set (truth/ and obs/) to disk and scores
//! bilinear interpolation on it, as the `eval` subcommand does.
//!
//!     cargo run --release --example evaluate_directory [dir]

use joint_demosaick::cfa::make_pattern;
use joint_demosaick::dataset::synthetic_image;
use joint_demosaick::eval::{evaluate, load_pairs, Method};
use joint_demosaick::imageio::write_image;
use joint_demosaick::noise::{noisy_observation, NoiseSpec};

fn main() -> joint_demosaick::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| {
        std::env::temp_dir().join("jdm_eval").to_string_lossy().into_owned()
    });
    let pattern = make_pattern("bayer_rggb")?;
    std::fs::create_dir_all(format!("{dir}/truth"))?;
    std::fs::create_dir_all(format!("{dir}/obs"))?;
    for i in 0..4 {
        let truth = synthetic_image(80, 120, 500 + i);
        let y = noisy_observation(&truth, &pattern, &NoiseSpec::iid(2.0, i))?;
        write_image(format!("{dir}/truth/scene{i}.ppm"), &truth)?;
        // raw float dump keeps the noisy samples unrounded
        write_image(format!("{dir}/obs/scene{i}.rflt"), y.data())?;
    }
    let pairs = load_pairs(&dir)?;
    let report = evaluate(&pairs, &pattern, 2.0, Method::Bilinear)?;
    print!("{}", report.to_table());
    println!("\n{}", report.to_csv());
    Ok(())
}
