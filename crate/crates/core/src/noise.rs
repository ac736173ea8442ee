//! Synthetic sensor noise.
//!
//! Gaussian draws come from a counter-based stream: entry `k` of a tensor
//! always consumes words `4k..4k+4` of a ChaCha8 keystream seeded with the
//! noise seed, and turns them into one standard normal via Box–Muller. The
//! value at an index therefore depends only on `(seed, index)`, whatever the
//! order or thread layout of generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cfa::{CfaPattern, MosaicObservation};
use crate::error::{arg_err, Error, Result};
use crate::tensor::ImageTensor;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// `x + σ·g`
    IidGaussian,
    /// `x + sqrt(a_shot·x + b_read)·g`
    Heteroscedastic,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid_gaussian" | "iid" | "gaussian" => Ok(NoiseKind::IidGaussian),
            "heteroscedastic" | "shot_read" => Ok(NoiseKind::Heteroscedastic),
            _ => arg_err(format!(
                "unknown noise kind '{s}' (expected iid_gaussian|heteroscedastic)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub a_shot: f64,
    pub b_read: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn iid(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::IidGaussian,
            sigma,
            a_shot: 0.0,
            b_read: 0.0,
            seed,
        }
    }

    pub fn heteroscedastic(a_shot: f64, b_read: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Heteroscedastic,
            sigma: 0.0,
            a_shot,
            b_read,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("a_shot", self.a_shot), ("b_read", self.b_read)] {
            if !(v >= 0.0) || !v.is_finite() {
                return arg_err(format!("noise {name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Standard deviation at intensity `x`.
    pub fn std_at(&self, x: f64) -> f64 {
        match self.kind {
            NoiseKind::IidGaussian => self.sigma,
            NoiseKind::Heteroscedastic => (self.a_shot * x + self.b_read).sqrt(),
        }
    }
}

/// `len` standard normal draws for stream positions `start..start+len`.
pub fn standard_normals(seed: u64, start: u64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(k, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(4 * (start as u128 + (k * CHUNK) as u128));
        for v in chunk.iter_mut() {
            *v = box_muller(rng.random::<u64>(), rng.random::<u64>());
        }
    });
    out
}

#[inline]
fn box_muller(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Adds noise to every entry of `image`. The result is not clipped.
pub fn add_noise(image: &ImageTensor, spec: &NoiseSpec) -> Result<ImageTensor> {
    spec.validate()?;
    if spec.kind == NoiseKind::Heteroscedastic {
        if let Some(v) = image.data().iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain(format!(
                "heteroscedastic noise needs non-negative intensities, found {v}"
            )));
        }
    }
    if spec.kind == NoiseKind::IidGaussian && spec.sigma == 0.0 {
        return Ok(image.clone());
    }
    let g = standard_normals(spec.seed, 0, image.len());
    let mut out = image.clone();
    for (v, n) in out.data_mut().iter_mut().zip(g) {
        *v += spec.std_at(*v) * n;
    }
    Ok(out)
}

/// `M(x + n)`: a noisy raw observation of a clean image. The recorded noise
/// level is `σ` for i.i.d. noise and the RMS standard deviation over the
/// image for heteroscedastic noise.
pub fn noisy_observation(
    image: &ImageTensor,
    pattern: &CfaPattern,
    spec: &NoiseSpec,
) -> Result<MosaicObservation> {
    let noisy = add_noise(image, spec)?;
    let sigma = match spec.kind {
        NoiseKind::IidGaussian => spec.sigma,
        NoiseKind::Heteroscedastic => {
            let mean_var = image
                .data()
                .iter()
                .map(|&x| spec.a_shot * x + spec.b_read)
                .sum::<f64>()
                / image.len() as f64;
            mean_var.sqrt()
        }
    };
    MosaicObservation::new(noisy, pattern.clone(), sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let x = ImageTensor::from_fn(5, 5, 3, |r, c, ch| (r + c + ch) as f64);
        assert_eq!(add_noise(&x, &NoiseSpec::iid(0.0, 3)).unwrap(), x);
    }

    #[test]
    fn same_seed_same_noise() {
        let x = ImageTensor::filled(20, 20, 3, 100.0);
        let a = add_noise(&x, &NoiseSpec::iid(5.0, 42)).unwrap();
        let b = add_noise(&x, &NoiseSpec::iid(5.0, 42)).unwrap();
        let c = add_noise(&x, &NoiseSpec::iid(5.0, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stream_is_position_addressed() {
        let whole = standard_normals(9, 0, 10_000);
        let tail = standard_normals(9, 5_000, 5_000);
        assert_eq!(&whole[5_000..], &tail[..]);
    }

    #[test]
    fn negative_intensity_rejected() {
        let x = ImageTensor::filled(2, 2, 1, -1.0);
        let r = add_noise(&x, &NoiseSpec::heteroscedastic(0.1, 1.0, 0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn negative_parameters_rejected() {
        let x = ImageTensor::filled(2, 2, 1, 1.0);
        assert!(add_noise(&x, &NoiseSpec::iid(-1.0, 0)).is_err());
    }

    #[test]
    fn iid_sample_std() {
        let x = ImageTensor::filled(1000, 1000, 1, 128.0);
        let y = add_noise(&x, &NoiseSpec::iid(15.0, 7)).unwrap();
        let n = y.len() as f64;
        let mean = y.data().iter().map(|v| v - 128.0).sum::<f64>() / n;
        let var = y.data().iter().map(|v| (v - 128.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3.0 * 15.0 / n.sqrt(), "mean {mean}");
        let std = var.sqrt();
        assert!((14.95..=15.05).contains(&std), "std {std}");
    }

    #[test]
    fn heteroscedastic_variance() {
        let level = 100.0;
        let spec = NoiseSpec::heteroscedastic(0.5, 4.0, 11);
        let x = ImageTensor::filled(1000, 1000, 1, level);
        let y = add_noise(&x, &spec).unwrap();
        let n = y.len() as f64;
        let var = y.data().iter().map(|v| (v - level).powi(2)).sum::<f64>() / n;
        let expect = 0.5 * level + 4.0;
        assert!((var / expect - 1.0).abs() < 0.01, "var {var} vs {expect}");
    }

    #[test]
    fn observation_keeps_zeros() {
        let x = ImageTensor::filled(6, 6, 3, 50.0);
        let p = CfaPattern::new(crate::cfa::PatternKind::XTrans);
        let y = noisy_observation(&x, &p, &NoiseSpec::iid(10.0, 1)).unwrap();
        assert_eq!(y.sigma(), 10.0);
        for r in 0..6 {
            for c in 0..6 {
                for ch in 0..3 {
                    if !p.samples(r, c, ch) {
                        assert_eq!(y.data().at(r, c, ch), 0.0);
                    }
                }
            }
        }
    }
}
