//! Central finite-difference checks of every hand-written backward pass.
//!
//! Each check evaluates `L(θ) = ⟨g, f(θ)⟩` for a fixed random `g` and
//! compares the analytic gradient against `(L(θ+h) − L(θ−h))/2h`, coordinate
//! by coordinate. The reported error is `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cascade::{demosaick, demosaick_backward, demosaick_forward, CascadeParams};
use crate::cfa::{data_consistency, make_pattern, mosaic, unsampled_part};
use crate::error::Result;
use crate::resdnet::{
    denoise, materialize_backward, materialize_weights, project_noise, project_noise_backward,
    projection_radius, resdnet_backward, resdnet_forward, Precision, ResDNetParams,
};
use crate::tensor::{
    clip, clip_backward, conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward,
    prelu, prelu_backward, reflexive_pad, reflexive_pad_backward, FilterBank, ImageTensor,
};

/// Bound for single layers on 5×5 inputs.
pub const LAYER_TOL: f64 = 1e-6;
/// Bound for the composed network and the cascade.
pub const NETWORK_TOL: f64 = 1e-4;
/// Finite-difference steps. The composed checks use a larger step because
/// their outputs are on the 0–255 scale, where rounding dominates at 1e-6.
const LAYER_STEP: f64 = 1e-6;
const NETWORK_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: String,
    pub coordinates: usize,
    pub rel_err: f64,
    pub tolerance: f64,
}

impl CheckEntry {
    pub fn passed(&self) -> bool {
        self.rel_err < self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradcheckReport {
    pub entries: Vec<CheckEntry>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(CheckEntry::passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_err).fold(0.0, f64::max)
    }

    fn push(&mut self, name: impl Into<String>, analytic: &[f64], numeric: &[f64], tolerance: f64) {
        self.entries.push(CheckEntry {
            name: name.into(),
            coordinates: analytic.len(),
            rel_err: rel_err(analytic, numeric),
            tolerance,
        });
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34} {:>7} {:>12} {:>9}  result", "check", "coords", "rel err", "tol")?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<34} {:>7} {:>12.3e} {:>9.0e}  {}",
                e.name,
                e.coordinates,
                e.rel_err,
                e.tolerance,
                if e.passed() { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "max relative error {:.3e}", self.max_rel_err())
    }
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, or 0 when both vanish.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x`, step `step·max(1, |xᵢ|)`.
pub fn numeric_gradient(
    x: &[f64],
    step: f64,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe)?;
        probe[i] = x[i] - h;
        let down = f(&probe)?;
        probe[i] = x[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, lo: f64, hi: f64) -> ImageTensor {
    ImageTensor::from_fn(h, w, c, |_, _, _| rng.random_range(lo..hi))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn reshape(like: &ImageTensor, data: &[f64]) -> ImageTensor {
    let (h, w, c) = like.shape();
    ImageTensor::from_vec(h, w, c, data.to_vec()).expect("same length")
}

fn random_bank(rng: &mut ChaCha8Rng, out: usize, inp: usize, k: usize, bias: usize) -> FilterBank {
    FilterBank::new(
        out,
        inp,
        k,
        k,
        random_vec(rng, out * inp * k * k, -1.0, 1.0),
        random_vec(rng, bias, -1.0, 1.0),
    )
    .expect("valid bank")
}

fn check_layers(rng: &mut ChaCha8Rng, report: &mut GradcheckReport) -> Result<()> {
    // reflexive padding
    let x = random_tensor(rng, 5, 5, 2, -1.0, 1.0);
    let g = random_tensor(rng, 9, 9, 2, -1.0, 1.0);
    let a = reflexive_pad_backward(&g, x.shape(), 2)?;
    let n = numeric_gradient(x.data(), LAYER_STEP, |v| Ok(reflexive_pad(&reshape(&x, v), 2)?.dot(&g)))?;
    report.push("reflexive_pad/input", a.data(), &n, LAYER_TOL);

    // correlation, both kernel sizes used by the network
    for k in [3, 5] {
        let x = random_tensor(rng, 5, 5, 2, -1.0, 1.0);
        let bank = random_bank(rng, 3, 2, k, 3);
        let g = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
        let a = conv2d_backward(&g, &x, &bank)?;
        let n = numeric_gradient(x.data(), LAYER_STEP, |v| Ok(conv2d(&reshape(&x, v), &bank)?.dot(&g)))?;
        report.push(format!("conv2d{k}x{k}/input"), a.input.data(), &n, LAYER_TOL);
        let n = numeric_gradient(&bank.weights, LAYER_STEP, |v| {
            let b = FilterBank { weights: v.to_vec(), ..bank.clone() };
            Ok(conv2d(&x, &b)?.dot(&g))
        })?;
        report.push(format!("conv2d{k}x{k}/weights"), &a.weights, &n, LAYER_TOL);
        let n = numeric_gradient(&bank.bias, LAYER_STEP, |v| {
            let b = FilterBank { bias: v.to_vec(), ..bank.clone() };
            Ok(conv2d(&x, &b)?.dot(&g))
        })?;
        report.push(format!("conv2d{k}x{k}/bias"), &a.bias, &n, LAYER_TOL);
    }

    // transposed correlation, features → RGB
    let x = random_tensor(rng, 5, 5, 4, -1.0, 1.0);
    let bank = random_bank(rng, 4, 3, 5, 3);
    let g = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
    let a = conv_transpose2d_backward(&g, &x, &bank)?;
    let n = numeric_gradient(x.data(), LAYER_STEP, |v| Ok(conv_transpose2d(&reshape(&x, v), &bank)?.dot(&g)))?;
    report.push("conv_transpose2d/input", a.input.data(), &n, LAYER_TOL);
    let n = numeric_gradient(&bank.weights, LAYER_STEP, |v| {
        let b = FilterBank { weights: v.to_vec(), ..bank.clone() };
        Ok(conv_transpose2d(&x, &b)?.dot(&g))
    })?;
    report.push("conv_transpose2d/weights", &a.weights, &n, LAYER_TOL);
    let n = numeric_gradient(&bank.bias, LAYER_STEP, |v| {
        let b = FilterBank { bias: v.to_vec(), ..bank.clone() };
        Ok(conv_transpose2d(&x, &b)?.dot(&g))
    })?;
    report.push("conv_transpose2d/bias", &a.bias, &n, LAYER_TOL);

    // PReLU
    let x = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
    let slopes = random_vec(rng, 3, 0.0, 0.5);
    let g = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
    let (ga, gk) = prelu_backward(&g, &x, &slopes)?;
    let n = numeric_gradient(x.data(), LAYER_STEP, |v| Ok(prelu(&reshape(&x, v), &slopes)?.dot(&g)))?;
    report.push("prelu/input", ga.data(), &n, LAYER_TOL);
    let n = numeric_gradient(&slopes, LAYER_STEP, |v| Ok(prelu(&x, v)?.dot(&g)))?;
    report.push("prelu/slopes", &gk, &n, LAYER_TOL);

    // clipping, with entries on both sides of each bound
    let x = random_tensor(rng, 5, 5, 3, -60.0, 320.0);
    let g = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
    let a = clip_backward(&g, &x, 0.0, 255.0)?;
    let n = numeric_gradient(x.data(), LAYER_STEP, |v| Ok(clip(&reshape(&x, v), 0.0, 255.0)?.dot(&g)))?;
    report.push("clip/input", a.data(), &n, LAYER_TOL);

    // projection onto the noise ball, outside and inside
    for (label, gamma) in [("exterior", -1.0), ("interior", 1.5)] {
        let e = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
        let sigma = 0.6;
        debug_assert_eq!(e.norm() > projection_radius(sigma, gamma, e.len()), label == "exterior");
        let g = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
        let (ge, gs, gg) = project_noise_backward(&g, &e, sigma, gamma)?;
        let n = numeric_gradient(e.data(), LAYER_STEP, |v| Ok(project_noise(&reshape(&e, v), sigma, gamma).dot(&g)))?;
        report.push(format!("projection_{label}/input"), ge.data(), &n, LAYER_TOL);
        let n = numeric_gradient(&[sigma, gamma], LAYER_STEP, |v| Ok(project_noise(&e, v[0], v[1]).dot(&g)))?;
        report.push(format!("projection_{label}/sigma_gamma"), &[gs, gg], &n, LAYER_TOL);
    }

    // filter parametrisation
    let raw = random_vec(rng, 27, -1.0, 1.0);
    let scale = 0.7;
    let g = random_vec(rng, 27, -1.0, 1.0);
    let dotg = |v: Vec<f64>| v.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
    let (gu, gs) = materialize_backward(&raw, scale, &g)?;
    let n = numeric_gradient(&raw, LAYER_STEP, |v| Ok(dotg(materialize_weights(v, scale)?)))?;
    report.push("filter_parametrisation/raw", &gu, &n, LAYER_TOL);
    let n = numeric_gradient(&[scale], LAYER_STEP, |v| Ok(dotg(materialize_weights(&raw, v[0])?)))?;
    report.push("filter_parametrisation/scale", &[gs], &n, LAYER_TOL);

    // data consistency
    let truth = random_tensor(rng, 5, 5, 3, 0.0, 255.0);
    let pattern = make_pattern("xtrans")?;
    let y = mosaic(&truth, &pattern)?;
    let u = random_tensor(rng, 5, 5, 3, 0.0, 255.0);
    let g = random_tensor(rng, 5, 5, 3, -1.0, 1.0);
    let a = unsampled_part(&g, &pattern);
    let n = numeric_gradient(u.data(), LAYER_STEP, |v| Ok(data_consistency(&reshape(&u, v), &y)?.dot(&g)))?;
    report.push("data_consistency/input", a.data(), &n, LAYER_TOL);
    Ok(())
}

fn flatten(arrays: Vec<&[f64]>) -> Vec<f64> {
    arrays.concat()
}

fn unflatten_denoiser(like: &ResDNetParams, flat: &[f64]) -> ResDNetParams {
    let mut p = like.clone();
    let mut offset = 0;
    for a in p.arrays_mut() {
        a.copy_from_slice(&flat[offset..offset + a.len()]);
        offset += a.len();
    }
    p
}

fn unflatten_cascade(like: &CascadeParams, flat: &[f64]) -> CascadeParams {
    let mut p = like.clone();
    let mut offset = 0;
    for a in p.arrays_mut() {
        a.copy_from_slice(&flat[offset..offset + a.len()]);
        offset += a.len();
    }
    p
}

/// Splits a flat gradient comparison into one report entry per named array.
fn push_per_array(
    report: &mut GradcheckReport,
    prefix: &str,
    names: &[(String, Vec<usize>, Vec<f64>)],
    analytic: &[f64],
    numeric: &[f64],
) {
    let mut offset = 0;
    for (name, _, values) in names {
        let r = offset..offset + values.len();
        report.push(format!("{prefix}/{name}"), &analytic[r.clone()], &numeric[r], NETWORK_TOL);
        offset += values.len();
    }
}

/// Full denoiser (depth 1, 8 features, 8×8) in both projection regimes.
fn check_denoiser(rng: &mut ChaCha8Rng, report: &mut GradcheckReport) -> Result<()> {
    for (label, gamma) in [("exterior", -4.0), ("interior", 4.0)] {
        let mut params = ResDNetParams::init(1, 8, rng.random())?;
        params.gamma = gamma;
        for b in params.head.bias.iter_mut().chain(params.tail.bias.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        let x = random_tensor(rng, 8, 8, 3, 60.0, 195.0);
        let sigma = 12.0;
        let g = random_tensor(rng, 8, 8, 3, -1.0, 1.0);
        let (_, cache) = resdnet_forward(&x, sigma, &params)?;
        let regime = if cache.residual_norm() > cache.projection_radius() {
            "exterior"
        } else {
            "interior"
        };
        let prefix = format!("resdnet_{label}");
        if regime != label {
            report.entries.push(CheckEntry {
                name: format!("{prefix}/regime"),
                coordinates: 0,
                rel_err: f64::INFINITY,
                tolerance: NETWORK_TOL,
            });
        }
        let grads = resdnet_backward(&g, &cache, &params)?;
        let eval = |x: &ImageTensor, s: f64, p: &ResDNetParams| -> Result<f64> {
            Ok(denoise(x, s, p, Precision::F64)?.dot(&g))
        };
        let n = numeric_gradient(x.data(), NETWORK_STEP, |v| eval(&reshape(&x, v), sigma, &params))?;
        report.push(format!("{prefix}/input"), grads.input.data(), &n, NETWORK_TOL);
        let n = numeric_gradient(&[sigma], NETWORK_STEP, |v| eval(&x, v[0], &params))?;
        report.push(format!("{prefix}/sigma"), &[grads.sigma], &n, NETWORK_TOL);
        let flat = flatten(params.arrays());
        let n = numeric_gradient(&flat, NETWORK_STEP, |v| eval(&x, sigma, &unflatten_denoiser(&params, v)))?;
        let a = flatten(grads.params.arrays());
        push_per_array(report, &prefix, &params.named_arrays(), &a, &n);
    }
    Ok(())
}

/// Three-step cascade on an 8×8 Bayer observation, every parameter.
fn check_cascade(rng: &mut ChaCha8Rng, report: &mut GradcheckReport) -> Result<()> {
    let mut denoiser = ResDNetParams::init(1, 4, rng.random())?;
    denoiser.gamma = 1.5;
    let params = CascadeParams::with_schedule(denoiser, 3, 15.0, 1.0)?;
    let truth = random_tensor(rng, 8, 8, 3, 60.0, 195.0);
    let y = mosaic(&truth, &make_pattern("bayer_rggb")?)?;
    let g = random_tensor(rng, 8, 8, 3, -1.0, 1.0);
    let (_, traj) = demosaick_forward(&y, &params)?;
    let grads = demosaick_backward(&g, &traj, &params)?;
    let flat = flatten(params.arrays());
    let n = numeric_gradient(&flat, NETWORK_STEP, |v| {
        Ok(demosaick(&y, &unflatten_cascade(&params, v), Precision::F64)?.dot(&g))
    })?;
    let a = flatten(grads.arrays());
    push_per_array(report, "cascade_k3", &params.named_arrays(), &a, &n);
    Ok(())
}

pub fn check_layer_suite(seed: u64) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::default();
    check_layers(&mut ChaCha8Rng::seed_from_u64(seed), &mut report)?;
    Ok(report)
}

pub fn check_denoiser_suite(seed: u64) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::default();
    check_denoiser(&mut ChaCha8Rng::seed_from_u64(seed), &mut report)?;
    Ok(report)
}

pub fn check_cascade_suite(seed: u64) -> Result<GradcheckReport> {
    let mut report = GradcheckReport::default();
    check_cascade(&mut ChaCha8Rng::seed_from_u64(seed), &mut report)?;
    Ok(report)
}

/// Every suite: single layers, the full denoiser, and the cascade.
pub fn run_all(seed: u64) -> Result<GradcheckReport> {
    let mut report = check_layer_suite(seed)?;
    report.entries.extend(check_denoiser_suite(seed.wrapping_add(1))?.entries);
    report.entries.extend(check_cascade_suite(seed.wrapping_add(2))?.entries);
    Ok(report)
}
