//! Joint demosaicking and denoising of colour filter array images with a
//! learned cascade.
//!
//! An observation `y = Mx + n` keeps one colour per pixel. The cascade
//! starts from `y` and repeats, for `K` steps with shared weights,
//!
//! ```text
//! u    = xᵢ + wᵢ(xᵢ − xᵢ₋₁)
//! xᵢ₊₁ = ResDNet((I − M)u + y, σᵢ)
//! ```
//!
//! where the residual denoiser estimates the noise in its input, projects
//! that estimate onto a ball of radius `e^γ·σ·sqrt(N−1)` and subtracts it.
//! All gradients are written by hand; [`gradcheck`] verifies them.
//!
//! ```no_run
//! use joint_demosaick::{cfa, cascade, resdnet};
//! # fn main() -> joint_demosaick::Result<()> {
//! let truth = joint_demosaick::dataset::synthetic_image(64, 64, 1);
//! let y = cfa::mosaic(&truth, &cfa::make_pattern("bayer_rggb")?)?;
//! let params = cascade::CascadeParams::with_schedule(resdnet::ResDNetParams::init(1, 8, 0)?, 5, 15.0, 1.0)?;
//! let x = cascade::demosaick(&y, &params, resdnet::Precision::F64)?;
//! # Ok(()) }
//! ```

pub mod cascade;
pub mod cfa;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod imageio;
pub mod majorize;
pub mod metrics;
pub mod modelfile;
pub mod noise;
pub mod resdnet;
pub mod tensor;
pub mod train;

pub use cascade::{demosaick, CascadeParams};
pub use cfa::{bilinear_demosaick, make_pattern, mosaic, CfaPattern, MosaicObservation, PatternKind};
pub use error::{Error, Result};
pub use resdnet::{denoise, Precision, ResDNetParams};
pub use tensor::ImageTensor;
