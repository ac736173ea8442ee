//! Evaluation over (ground truth, observation) image pairs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::cascade::{demosaick, CascadeParams};
use crate::cfa::{bilinear_demosaick, CfaPattern};
use crate::dataset::IMAGE_EXTENSIONS;
use crate::error::{Error, Result};
use crate::imageio::{observation_from_image, read_image};
use crate::metrics::{format_psnr, linrgb_to_srgb, psnr_255};
use crate::resdnet::Precision;
use crate::tensor::ImageTensor;

/// How observations are turned into images.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Bilinear,
    Cascade(&'a CascadeParams, Precision),
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Bilinear => "bilinear",
            Method::Cascade(..) => "cascade",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub name: String,
    pub psnr_linrgb: f64,
    pub psnr_srgb: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    /// In filename order.
    pub images: Vec<ImageScore>,
    pub parameter_breakdown: Vec<(&'static str, usize)>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    pub fn mean_psnr_linrgb(&self) -> f64 {
        mean(self.images.iter().map(|s| s.psnr_linrgb))
    }

    pub fn mean_psnr_srgb(&self) -> f64 {
        mean(self.images.iter().map(|s| s.psnr_srgb))
    }

    pub fn mean_runtime_s(&self) -> f64 {
        mean(self.images.iter().map(|s| s.runtime_s))
    }

    pub fn total_parameters(&self) -> usize {
        self.parameter_breakdown.iter().map(|(_, n)| n).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,psnr_linrgb,psnr_srgb,runtime_s\n");
        for s in &self.images {
            let _ = writeln!(
                out,
                "{},{},{},{:.6}",
                s.name,
                format_psnr(s.psnr_linrgb),
                format_psnr(s.psnr_srgb),
                s.runtime_s
            );
        }
        let _ = writeln!(
            out,
            "mean,{},{},{:.6}",
            format_psnr(self.mean_psnr_linrgb()),
            format_psnr(self.mean_psnr_srgb()),
            self.mean_runtime_s()
        );
        out
    }

    pub fn to_table(&self) -> String {
        let width = self.images.iter().map(|s| s.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("method: {}\n", self.method);
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}  {:>10}", "image", "linRGB dB", "sRGB dB", "time s");
        let row = |out: &mut String, name: &str, a: f64, b: f64, t: f64| {
            let _ = writeln!(out, "{name:<width$}  {:>12}  {:>12}  {t:>10.4}", format_psnr(a), format_psnr(b));
        };
        for s in &self.images {
            row(&mut out, &s.name, s.psnr_linrgb, s.psnr_srgb, s.runtime_s);
        }
        row(
            &mut out,
            "mean",
            self.mean_psnr_linrgb(),
            self.mean_psnr_srgb(),
            self.mean_runtime_s(),
        );
        if !self.parameter_breakdown.is_empty() {
            let _ = writeln!(out, "trainable parameters: {}", self.total_parameters());
        }
        out
    }
}

/// Scores one reconstruction method on named `(truth, observation)` pairs.
/// Pairs are processed concurrently; the report keeps the input order.
pub fn evaluate(
    pairs: &[(String, ImageTensor, ImageTensor)],
    pattern: &CfaPattern,
    sigma: f64,
    method: Method<'_>,
) -> Result<EvalReport> {
    let images = pairs
        .par_iter()
        .map(|(name, truth, raw)| {
            let y = observation_from_image(raw, pattern, sigma)?;
            if y.shape() != truth.shape() {
                return Err(Error::Shape(format!(
                    "{name}: observation {:?} and truth {:?} differ",
                    y.shape(),
                    truth.shape()
                )));
            }
            let start = Instant::now();
            let out = match method {
                Method::Bilinear => bilinear_demosaick(&y),
                Method::Cascade(params, precision) => demosaick(&y, params, precision)?,
            };
            let runtime_s = start.elapsed().as_secs_f64();
            out.ensure_finite(name)?;
            Ok(ImageScore {
                name: name.clone(),
                psnr_linrgb: psnr_255(&out, truth)?,
                psnr_srgb: psnr_255(&linrgb_to_srgb(&out), &linrgb_to_srgb(truth))?,
                runtime_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let parameter_breakdown = match method {
        Method::Bilinear => Vec::new(),
        Method::Cascade(p, _) => p.parameter_breakdown(),
    };
    Ok(EvalReport {
        method: method.name().to_string(),
        images,
        parameter_breakdown,
    })
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Loads `dir/truth/*` and `dir/obs/*`, pairing files by stem.
pub fn load_pairs(dir: impl AsRef<Path>) -> Result<Vec<(String, ImageTensor, ImageTensor)>> {
    let dir = dir.as_ref();
    let truths = image_files(&dir.join("truth"))?;
    let obs = image_files(&dir.join("obs"))?;
    if truths.is_empty() {
        return Err(Error::Argument(format!("no images in {}", dir.join("truth").display())));
    }
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned());
    truths
        .iter()
        .map(|t| {
            let name = stem(t).unwrap_or_default();
            let o = obs
                .iter()
                .find(|o| stem(o).as_deref() == Some(name.as_str()))
                .ok_or_else(|| Error::Argument(format!("no observation for {name} in obs/")))?;
            Ok((name, read_image(t)?, read_image(o)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::{make_pattern, mosaic};

    #[test]
    fn mean_is_arithmetic() {
        let p = make_pattern("bayer_rggb").unwrap();
        let pairs: Vec<_> = (0..3)
            .map(|i| {
                let t = crate::dataset::synthetic_image(12, 12, i);
                let y = mosaic(&t, &p).unwrap().data().clone();
                (format!("img{i}"), t, y)
            })
            .collect();
        let r = evaluate(&pairs, &p, 0.0, Method::Bilinear).unwrap();
        let m = r.images.iter().map(|s| s.psnr_linrgb).sum::<f64>() / 3.0;
        assert!((r.mean_psnr_linrgb() - m).abs() < 1e-12);
        assert_eq!(r.images[2].name, "img2");
        assert!(r.to_csv().lines().last().unwrap().starts_with("mean,"));
    }
}
