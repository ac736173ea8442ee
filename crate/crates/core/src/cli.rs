//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 numeric failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cascade::CascadeParams;
use crate::cfa::{bilinear_demosaick, CfaPattern, PatternKind};
use crate::config::load_config;
use crate::dataset::{load_dir, synthetic_dataset, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, load_pairs, Method};
use crate::gradcheck::{run_all, NETWORK_TOL};
use crate::imageio::{observation_from_image, read_image, write_image};
use crate::modelfile::{decode, load_denoiser, load_model, save_denoiser, save_model};
use crate::noise::{noisy_observation, NoiseKind, NoiseSpec};
use crate::resdnet::{denoise, Precision, ResDNetParams};
use crate::train::{pretrain_denoiser, train_joint, Phase, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Total reported for the full-size configuration (depth 5, 64 features,
/// ten steps), used as the reference by `params`.
pub const REFERENCE_PARAMETER_COUNT: usize = 380_356;

#[derive(Parser, Debug)]
#[command(name = "joint-demosaick", version, about = "Joint demosaicking and denoising")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// CFA layout: bayer_rggb (default), bayer_grbg, bayer_gbrg, bayer_bggr or xtrans
    #[arg(long, global = true)]
    pattern: Option<String>,
    /// Noise standard deviation on the 0–255 scale
    #[arg(long, global = true, default_value_t = 0.0)]
    sigma: f64,
    /// iid_gaussian or heteroscedastic
    #[arg(long, global = true, default_value = "iid_gaussian")]
    noise_kind: String,
    /// Shot-noise gain for heteroscedastic noise
    #[arg(long, global = true, default_value_t = 0.0)]
    a_shot: f64,
    /// Read-noise variance for heteroscedastic noise
    #[arg(long, global = true, default_value_t = 0.0)]
    b_read: f64,
    /// Random seed (default 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model file
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default 1; `eval` defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Inference arithmetic: f32 or f64
    #[arg(long, global = true, default_value = "f64")]
    precision: String,
}

#[derive(Args, Debug, Clone)]
struct DataSource {
    /// Directory of RGB training images
    data: Option<PathBuf>,
    /// Train on this many generated scenes instead of a directory
    #[arg(long)]
    synthetic: Option<usize>,
    /// Side length of generated scenes
    #[arg(long, default_value_t = 96)]
    synthetic_size: usize,
    /// Training log (CSV: step, lr, loss, val_psnr)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean RGB image → mosaicked (optionally noisy) observation
    Mosaic { input: PathBuf },
    /// Observation → RGB image with a trained cascade
    Demosaick { input: PathBuf },
    /// Observation → RGB image by bilinear interpolation
    Bilinear { input: PathBuf },
    /// Noisy RGB image → denoised image at noise level --sigma
    Denoise { input: PathBuf },
    /// Pretrain the denoiser
    Pretrain(DataSource),
    /// Train the cascade end to end
    Train {
        #[command(flatten)]
        source: DataSource,
        /// Pretrained denoiser to start from (fresh initialisation otherwise)
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Score a method on DIR/truth and DIR/obs
    Eval {
        dir: PathBuf,
        /// Score bilinear interpolation even when --model is given
        #[arg(long)]
        bilinear: bool,
    },
    /// Finite-difference gradient checks
    Gradcheck,
    /// Trainable parameter breakdown
    Params {
        #[arg(long, default_value_t = 5)]
        depth: usize,
        #[arg(long, default_value_t = 64)]
        features: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
}

impl Common {
    fn pattern(&self) -> Result<CfaPattern> {
        self.pattern.as_deref().unwrap_or("bayer_rggb").parse()
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Argument(_) => EXIT_USAGE,
        Error::Numeric(_) | Error::DegenerateFilter(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let default_threads = match cli.command {
        Command::Eval { .. } => 0,
        _ => 1,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads.unwrap_or(default_threads))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Argument(format!("{flag} is required for this command")))
}

fn noise_spec(c: &Common) -> Result<NoiseSpec> {
    let spec = match c.noise_kind.parse::<NoiseKind>()? {
        NoiseKind::IidGaussian => NoiseSpec::iid(c.sigma, c.seed()),
        NoiseKind::Heteroscedastic => NoiseSpec::heteroscedastic(c.a_shot, c.b_read, c.seed()),
    };
    spec.validate()?;
    Ok(spec)
}

fn dataset(src: &DataSource, seed: u64) -> Result<Dataset> {
    match (&src.data, src.synthetic) {
        (Some(dir), None) => load_dir(dir),
        (None, Some(n)) => Ok(synthetic_dataset(n, src.synthetic_size, src.synthetic_size, seed)),
        _ => Err(Error::Argument("give either a data directory or --synthetic N".into())),
    }
}

fn train_config(c: &Common, src: &DataSource, phase: Phase) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::desk(phase);
    if let Some(path) = &c.config {
        cfg = load_config(cfg, path)?;
    }
    // explicit flags win over the file
    cfg.phase = phase;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &c.pattern {
        cfg.pattern = p.parse::<PatternKind>()?;
    }
    if phase == Phase::Joint && c.sigma > 0.0 {
        cfg.noise_sigma = c.sigma;
    }
    if let Some(log) = &src.log {
        cfg.log_path = Some(log.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_finite(img: &crate::tensor::ImageTensor) -> Result<()> {
    img.ensure_finite("output image")
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    let precision: Precision = c.precision.parse()?;
    match &cli.command {
        Command::Mosaic { input } => {
            let out = require(&c.out, "--out")?;
            let pattern = c.pattern()?;
            let y = noisy_observation(&read_image(input)?, &pattern, &noise_spec(c)?)?;
            write_image(out, y.data())?;
        }
        Command::Demosaick { input } => {
            let out = require(&c.out, "--out")?;
            let params = load_model(require(&c.model, "--model")?)?;
            let y = observation_from_image(&read_image(input)?, &c.pattern()?, c.sigma)?;
            let x = crate::cascade::demosaick(&y, &params, precision)?;
            ensure_finite(&x)?;
            write_image(out, &x)?;
        }
        Command::Bilinear { input } => {
            let out = require(&c.out, "--out")?;
            let y = observation_from_image(&read_image(input)?, &c.pattern()?, c.sigma)?;
            write_image(out, &bilinear_demosaick(&y))?;
        }
        Command::Denoise { input } => {
            let out = require(&c.out, "--out")?;
            let params = load_denoiser(require(&c.model, "--model")?)?;
            let x = denoise(&read_image(input)?, c.sigma, &params, precision)?;
            ensure_finite(&x)?;
            write_image(out, &x)?;
        }
        Command::Pretrain(src) => {
            let out = require(&c.out, "--out")?;
            let cfg = train_config(c, src, Phase::Pretrain)?;
            let data = dataset(src, cfg.seed)?;
            let init = ResDNetParams::init(cfg.depth, cfg.features, cfg.seed)?;
            let trained = pretrain_denoiser(&data, init, &cfg)?;
            save_denoiser(&trained.params, out)?;
            println!(
                "best validation PSNR {:.3} dB at step {} (sigma {})",
                trained.best_val_psnr, trained.best_step, cfg.val_sigma
            );
        }
        Command::Train { source, init } => {
            let out = require(&c.out, "--out")?;
            let cfg = train_config(c, source, Phase::Joint)?;
            let data = dataset(source, cfg.seed)?;
            let denoiser = match init {
                Some(p) => load_denoiser(p)?,
                None => ResDNetParams::init(cfg.depth, cfg.features, cfg.seed)?,
            };
            let trained = train_joint(&data, denoiser, &cfg)?;
            save_model(&trained.params, out)?;
            println!(
                "best validation PSNR {:.3} dB at step {}",
                trained.best_val_psnr, trained.best_step
            );
        }
        Command::Eval { dir, bilinear } => {
            let pattern = c.pattern()?;
            let pairs = load_pairs(dir)?;
            let params = match (&c.model, bilinear) {
                (Some(p), false) => Some(load_model(p)?),
                _ => None,
            };
            let method = match &params {
                Some(p) => Method::Cascade(p, precision),
                None => Method::Bilinear,
            };
            let report = evaluate(&pairs, &pattern, c.sigma, method)?;
            print!("{}", report.to_table());
            for (group, n) in &report.parameter_breakdown {
                println!("  {group:<14} {n}");
            }
            if let Some(out) = &c.out {
                std::fs::write(out, report.to_csv())?;
            }
        }
        Command::Gradcheck => {
            let report = run_all(c.seed())?;
            println!("{report}");
            let ok = report.passed() && report.max_rel_err() < NETWORK_TOL;
            println!("{}", if ok { "gradcheck passed" } else { "gradcheck FAILED" });
            return Ok(if ok { EXIT_OK } else { EXIT_NUMERIC });
        }
        Command::Params {
            depth,
            features,
            steps,
        } => {
            let params = match &c.model {
                Some(path) => {
                    let file = decode(&std::fs::read(path)?)?;
                    match file.schedule {
                        Some((w, s)) => CascadeParams::new(file.denoiser, w, s)?,
                        None => {
                            let groups = file.denoiser.parameter_breakdown();
                            print!("{}", format_breakdown(&groups, false));
                            return Ok(EXIT_OK);
                        }
                    }
                }
                None => {
                    let d = ResDNetParams::init(*depth, *features, 0)?;
                    CascadeParams::with_schedule(d, *steps, 15.0, 1.0)?
                }
            };
            let full_size = params.denoiser.depth == 5 && params.denoiser.features == 64 && params.steps() == 10;
            print!("{}", format_breakdown(&params.parameter_breakdown(), full_size));
        }
    }
    Ok(EXIT_OK)
}

/// Per-group table with the total; with `compare`, also the deviation from
/// [`REFERENCE_PARAMETER_COUNT`].
pub fn format_breakdown(groups: &[(&'static str, usize)], compare: bool) -> String {
    let total: usize = groups.iter().map(|(_, n)| n).sum();
    let mut out = String::new();
    for (g, n) in groups {
        out.push_str(&format!("{g:<14} {n:>9}\n"));
    }
    out.push_str(&format!("{:<14} {total:>9}\n", "total"));
    if compare {
        let dev = 100.0 * (total as f64 - REFERENCE_PARAMETER_COUNT as f64) / REFERENCE_PARAMETER_COUNT as f64;
        out.push_str(&format!(
            "reference      {REFERENCE_PARAMETER_COUNT:>9}  (deviation {dev:+.4}%)\n"
        ));
    }
    out.push_str(
        "counted: raw filters u, one scale s per filter, biases (3 on the output layer), \
         one PReLU slope per channel per block, gamma, and the cascade's w and sigma\n",
    );
    out
}
