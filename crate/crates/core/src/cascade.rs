//! The unrolled demosaicking cascade.
//!
//! Starting from `x⁽⁰⁾ = 0`, `x⁽¹⁾ = y`, each of the `K` steps extrapolates
//! `u = x⁽ⁱ⁾ + wᵢ(x⁽ⁱ⁾ − x⁽ⁱ⁻¹⁾)`, re-imposes the observed samples and
//! denoises at level `σᵢ`:
//!
//! ```text
//! x⁽ⁱ⁺¹⁾ = ResDNet((I − M)u + y, σᵢ)
//! ```
//!
//! One set of denoiser parameters is shared by all steps.

use crate::cfa::{data_consistency, unsampled_part, CfaPattern, MosaicObservation};
use crate::error::{arg_err, shape_err, Result};
use crate::resdnet::{
    denoise, resdnet_backward, resdnet_forward, DenoiseCache, Precision, ResDNetParams,
};
use crate::tensor::ImageTensor;

/// Lower bound kept on every learned noise level.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// `wᵢ = (i−1)/(i+2)` and `σ` geometrically spaced from `sigma_max` down to `sigma_min`.
pub fn init_schedule(k: usize, sigma_max: f64, sigma_min: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if k < 1 {
        return arg_err("cascade needs at least one step");
    }
    if !(sigma_min > 0.0) || !(sigma_max >= sigma_min) || !sigma_max.is_finite() {
        return arg_err(format!(
            "need sigma_max >= sigma_min > 0, got {sigma_max} and {sigma_min}"
        ));
    }
    let w = (1..=k).map(|i| (i as f64 - 1.0) / (i as f64 + 2.0)).collect();
    let sigmas = if k == 1 {
        vec![sigma_max]
    } else {
        let ratio = sigma_min / sigma_max;
        (0..k)
            .map(|j| match j {
                0 => sigma_max,
                _ if j == k - 1 => sigma_min,
                _ => sigma_max * ratio.powf(j as f64 / (k - 1) as f64),
            })
            .collect()
    };
    Ok((w, sigmas))
}

/// Shared denoiser plus per-step extrapolation weights and noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeParams {
    pub denoiser: ResDNetParams,
    pub w: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl CascadeParams {
    pub fn new(denoiser: ResDNetParams, w: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let p = Self {
            denoiser,
            w,
            sigmas,
        };
        p.validate()?;
        Ok(p)
    }

    /// Cascade with the default schedule around an existing denoiser.
    pub fn with_schedule(
        denoiser: ResDNetParams,
        k: usize,
        sigma_max: f64,
        sigma_min: f64,
    ) -> Result<Self> {
        let (w, sigmas) = init_schedule(k, sigma_max, sigma_min)?;
        Self::new(denoiser, w, sigmas)
    }

    pub fn steps(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.is_empty() || self.w.len() != self.sigmas.len() {
            return shape_err(format!(
                "cascade has {} weights and {} noise levels",
                self.w.len(),
                self.sigmas.len()
            ));
        }
        if let Some(s) = self.sigmas.iter().find(|&&s| !(s > 0.0)) {
            return arg_err(format!("cascade noise levels must be positive, found {s}"));
        }
        self.denoiser.check_shape()
    }

    pub fn named_arrays(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = self.denoiser.named_arrays();
        out.push(("cascade.w".into(), vec![self.w.len()], self.w.clone()));
        out.push(("cascade.sigma".into(), vec![self.sigmas.len()], self.sigmas.clone()));
        out
    }

    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out = self.denoiser.arrays();
        out.push(&self.w);
        out.push(&self.sigmas);
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let Self {
            denoiser,
            w,
            sigmas,
        } = self;
        let mut out = denoiser.arrays_mut();
        out.push(w);
        out.push(sigmas);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.denoiser.num_scalars() + 2 * self.steps()
    }

    pub fn parameter_breakdown(&self) -> Vec<(&'static str, usize)> {
        let mut out = self.denoiser.parameter_breakdown();
        out.push(("cascade.w", self.w.len()));
        out.push(("cascade.sigma", self.sigmas.len()));
        out
    }
}

/// Gradients with respect to every cascade parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeGrads {
    pub denoiser: ResDNetParams,
    pub w: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl CascadeGrads {
    pub fn zeros_like(params: &CascadeParams) -> Self {
        Self {
            denoiser: params.denoiser.zeros_like(),
            w: vec![0.0; params.steps()],
            sigmas: vec![0.0; params.steps()],
        }
    }

    /// Same array order as [`CascadeParams::arrays`].
    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out = self.denoiser.arrays();
        out.push(&self.w);
        out.push(&self.sigmas);
        out
    }

    pub fn add_assign(&mut self, other: &CascadeGrads) {
        self.denoiser.axpy(1.0, &other.denoiser);
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.sigmas.iter_mut().zip(&other.sigmas) {
            *a += b;
        }
    }
}

/// Intermediates of one cascade evaluation, kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pattern: CfaPattern,
    /// `x⁽⁰⁾ … x⁽ᴷ⁺¹⁾`
    states: Vec<ImageTensor>,
    /// Extrapolated point `u` of each step.
    extrapolated: Vec<ImageTensor>,
    caches: Vec<DenoiseCache>,
}

impl Trajectory {
    pub fn states(&self) -> &[ImageTensor] {
        &self.states
    }

    pub fn extrapolated(&self) -> &[ImageTensor] {
        &self.extrapolated
    }

    pub fn caches(&self) -> &[DenoiseCache] {
        &self.caches
    }

    pub fn steps(&self) -> usize {
        self.caches.len()
    }
}

fn check_observation(y: &MosaicObservation, params: &CascadeParams) -> Result<()> {
    params.validate()?;
    if y.data().channels() != 3 {
        return shape_err("observation must have 3 channels");
    }
    Ok(())
}

fn extrapolate(cur: &ImageTensor, prev: &ImageTensor, w: f64) -> ImageTensor {
    cur.zip_map(prev, |a, b| a + w * (a - b))
}

/// Runs all `K` steps and records the trajectory.
pub fn demosaick_forward(
    y: &MosaicObservation,
    params: &CascadeParams,
) -> Result<(ImageTensor, Trajectory)> {
    check_observation(y, params)?;
    let (h, w, c) = y.shape();
    let mut states = vec![ImageTensor::zeros(h, w, c), y.data().clone()];
    let mut extrapolated = Vec::with_capacity(params.steps());
    let mut caches = Vec::with_capacity(params.steps());
    for (i, (&wi, &si)) in params.w.iter().zip(&params.sigmas).enumerate() {
        let u = extrapolate(&states[i + 1], &states[i], wi);
        let z = data_consistency(&u, y)?;
        let (next, cache) = resdnet_forward(&z, si, &params.denoiser)?;
        extrapolated.push(u);
        caches.push(cache);
        states.push(next);
    }
    let out = states.last().expect("K >= 1").clone();
    Ok((
        out,
        Trajectory {
            pattern: y.pattern().clone(),
            states,
            extrapolated,
            caches,
        },
    ))
}

/// Inference without a trajectory.
pub fn demosaick(
    y: &MosaicObservation,
    params: &CascadeParams,
    precision: Precision,
) -> Result<ImageTensor> {
    check_observation(y, params)?;
    let (h, w, c) = y.shape();
    let mut prev = ImageTensor::zeros(h, w, c);
    let mut cur = y.data().clone();
    for (&wi, &si) in params.w.iter().zip(&params.sigmas) {
        let u = extrapolate(&cur, &prev, wi);
        let z = data_consistency(&u, y)?;
        let next = denoise(&z, si, &params.denoiser, precision)?;
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

/// Backpropagation through time over a recorded trajectory.
pub fn demosaick_backward(
    grad: &ImageTensor,
    trajectory: &Trajectory,
    params: &CascadeParams,
) -> Result<CascadeGrads> {
    let k = params.steps();
    if trajectory.steps() != k || trajectory.states.len() != k + 2 {
        return shape_err(format!(
            "trajectory has {} steps, parameters have {k}",
            trajectory.steps()
        ));
    }
    grad.check_same_shape(&trajectory.states[0], "cascade backward")?;
    let (h, w, c) = grad.shape();
    let mut grads = CascadeGrads::zeros_like(params);
    // gradient accumulators for x⁽⁰⁾ … x⁽ᴷ⁺¹⁾
    let mut g_states: Vec<ImageTensor> = (0..k + 2).map(|_| ImageTensor::zeros(h, w, c)).collect();
    g_states[k + 1] = grad.clone();
    for i in (0..k).rev() {
        let g_next = std::mem::replace(&mut g_states[i + 2], ImageTensor::zeros(h, w, c));
        let step = resdnet_backward(&g_next, &trajectory.caches[i], &params.denoiser)?;
        grads.denoiser.axpy(1.0, &step.params);
        grads.sigmas[i] = step.sigma;
        let g_u = unsampled_part(&step.input, &trajectory.pattern);
        let delta = trajectory.states[i + 1].sub(&trajectory.states[i]);
        grads.w[i] = g_u.dot(&delta);
        let wi = params.w[i];
        g_states[i + 1].axpy(1.0 + wi, &g_u);
        g_states[i].axpy(-wi, &g_u);
    }
    Ok(grads)
}
