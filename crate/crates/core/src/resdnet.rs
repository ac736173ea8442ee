//! Residual denoising network.
//!
//! The network estimates the noise realisation in its input, rescales that
//! estimate onto the ball of radius `ε = e^γ·σ·sqrt(N−1)` and subtracts it:
//!
//! ```text
//! x ─ conv5x5 (3→F) ─┬─ [PReLU → conv3x3 → PReLU → conv3x3] ─(+)─ … ─ convT5x5 (F→3) ─ project(σ, γ) ─┐
//!                    └───────────── shortcut ─────────────────┘                                       │
//! x ───────────────────────────────────────────────────────────────────────────────────────── (−) ─ clip[0,255]
//! ```
//!
//! Every filter is stored as a raw array `u` and a scale `s` and materialised
//! as the zero-mean filter `s·(u−ū)/‖u−ū‖₂`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::tensor::{
    clip, clip_backward, conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward,
    prelu, prelu_backward, FilterBank, ImageTensor,
};

pub const DEFAULT_FEATURES: usize = 64;
pub const HEAD_KERNEL: usize = 5;
pub const BLOCK_KERNEL: usize = 3;
pub const TAIL_KERNEL: usize = 5;
pub const INIT_SLOPE: f64 = 0.25;
const DEGENERATE_TOL: f64 = 1e-12;
pub const INTENSITY_MAX: f64 = 255.0;

/// Arithmetic used for inference. `F32` rounds parameters and every
/// intermediate activation to single precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => arg_err(format!("unknown precision '{s}' (expected f32|f64)")),
        }
    }
}

impl Precision {
    fn apply(self, t: ImageTensor) -> ImageTensor {
        match self {
            Precision::F64 => t,
            Precision::F32 => t.map(|v| v as f32 as f64),
        }
    }

    fn apply_bank(self, mut f: FilterBank) -> FilterBank {
        if self == Precision::F32 {
            for v in f.weights.iter_mut().chain(f.bias.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
        f
    }
}

/// `s·(u−ū)/‖u−ū‖₂` for a single filter.
pub fn materialize_weights(raw: &[f64], scale: f64) -> Result<Vec<f64>> {
    let (centered, norm) = center(raw)?;
    Ok(centered.iter().map(|c| scale * c / norm).collect())
}

fn center(raw: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let centered: Vec<f64> = raw.iter().map(|u| u - mean).collect();
    let norm = centered.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(norm > DEGENERATE_TOL) {
        return Err(Error::DegenerateFilter(format!(
            "raw filter of length {} is constant (‖u−ū‖ = {norm:e})",
            raw.len()
        )));
    }
    Ok((centered, norm))
}

/// Pulls a gradient on the materialised filter back to `(∂/∂u, ∂/∂s)`.
pub fn materialize_backward(raw: &[f64], scale: f64, grad_v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (centered, norm) = center(raw)?;
    let unit: Vec<f64> = centered.iter().map(|c| c / norm).collect();
    let along: f64 = unit.iter().zip(grad_v).map(|(a, b)| a * b).sum();
    let mean_g = grad_v.iter().sum::<f64>() / grad_v.len() as f64;
    // dv/du = (s/n)(I − ĉĉᵀ)(I − 11ᵀ/L); ĉ is already zero-mean.
    let gu = grad_v
        .iter()
        .zip(&unit)
        .map(|(g, c)| scale / norm * (g - mean_g - c * along))
        .collect();
    Ok((gu, along))
}

/// One parametrised convolution layer: raw filters, per-filter scales and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    /// `[out][in][kernel][kernel]`
    pub raw: Vec<f64>,
    /// One scale per output filter.
    pub scale: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    fn he_init(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        fan_in: usize,
        bias_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let raw: Vec<f64> = (0..out_channels * in_channels * kernel * kernel)
            .map(|_| normal.sample(rng))
            .collect();
        let len = in_channels * kernel * kernel;
        let scale = raw
            .chunks_exact(len)
            .map(|u| center(u).map(|(_, n)| n).unwrap_or(1.0))
            .collect();
        Self {
            out_channels,
            in_channels,
            kernel,
            raw,
            scale,
            bias: vec![0.0; bias_len],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            raw: vec![0.0; self.raw.len()],
            scale: vec![0.0; self.scale.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn filter_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// The effective filter bank, each output filter normalised on its own.
    pub fn materialize(&self) -> Result<FilterBank> {
        let len = self.filter_len();
        let mut weights = Vec::with_capacity(self.raw.len());
        for (u, &s) in self.raw.chunks_exact(len).zip(&self.scale) {
            weights.extend(materialize_weights(u, s)?);
        }
        FilterBank::new(
            self.out_channels,
            self.in_channels,
            self.kernel,
            self.kernel,
            weights,
            self.bias.clone(),
        )
    }

    /// Gradient on effective weights → gradient on `(raw, scale)`, bias passed through.
    fn pull_back(&self, grad_weights: &[f64], grad_bias: Vec<f64>) -> Result<ConvParams> {
        let len = self.filter_len();
        let mut raw = Vec::with_capacity(self.raw.len());
        let mut scale = Vec::with_capacity(self.scale.len());
        for ((u, &s), g) in self
            .raw
            .chunks_exact(len)
            .zip(&self.scale)
            .zip(grad_weights.chunks_exact(len))
        {
            let (gu, gs) = materialize_backward(u, s, g)?;
            raw.extend(gu);
            scale.push(gs);
        }
        Ok(ConvParams {
            raw,
            scale,
            bias: grad_bias,
            ..*self
        })
    }
}

/// PReLU followed by a 3×3 convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearBlock {
    pub slopes: Vec<f64>,
    pub conv: ConvParams,
}

/// All trainable denoiser parameters. The same shape also carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ResDNetParams {
    pub depth: usize,
    pub features: usize,
    pub head: ConvParams,
    /// `2·depth` blocks; pairs `(2k, 2k+1)` share one shortcut.
    pub blocks: Vec<NonlinearBlock>,
    /// Stored in forward-conv orientation (`features` filters over 3
    /// channels) and applied transposed; `bias` has 3 entries.
    pub tail: ConvParams,
    pub gamma: f64,
}

/// He-initialised network of the given depth with the default width.
pub fn init_resdnet(depth: usize, seed: u64) -> Result<ResDNetParams> {
    ResDNetParams::init(depth, DEFAULT_FEATURES, seed)
}

impl ResDNetParams {
    pub fn init(depth: usize, features: usize, seed: u64) -> Result<Self> {
        if depth < 1 {
            return arg_err("network depth must be at least 1");
        }
        if features < 1 {
            return arg_err("network needs at least one feature channel");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = ConvParams::he_init(
            features,
            3,
            HEAD_KERNEL,
            3 * HEAD_KERNEL * HEAD_KERNEL,
            features,
            &mut rng,
        );
        let blocks = (0..2 * depth)
            .map(|_| NonlinearBlock {
                slopes: vec![INIT_SLOPE; features],
                conv: ConvParams::he_init(
                    features,
                    features,
                    BLOCK_KERNEL,
                    features * BLOCK_KERNEL * BLOCK_KERNEL,
                    features,
                    &mut rng,
                ),
            })
            .collect();
        let tail = ConvParams::he_init(
            features,
            3,
            TAIL_KERNEL,
            features * TAIL_KERNEL * TAIL_KERNEL,
            3,
            &mut rng,
        );
        Ok(Self {
            depth,
            features,
            head,
            blocks,
            tail,
            gamma: 0.0,
        })
    }

    /// Same shape, every entry zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            depth: self.depth,
            features: self.features,
            head: self.head.zeros_like(),
            blocks: self
                .blocks
                .iter()
                .map(|b| NonlinearBlock {
                    slopes: vec![0.0; b.slopes.len()],
                    conv: b.conv.zeros_like(),
                })
                .collect(),
            tail: self.tail.zeros_like(),
            gamma: 0.0,
        }
    }

    /// Named parameter arrays in a fixed order, with their dimensions.
    pub fn named_arrays(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        let mut conv = |prefix: &str, c: &ConvParams| {
            out.push((
                format!("{prefix}.u"),
                vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
                c.raw.clone(),
            ));
            out.push((format!("{prefix}.s"), vec![c.scale.len()], c.scale.clone()));
            out.push((format!("{prefix}.bias"), vec![c.bias.len()], c.bias.clone()));
        };
        conv("head", &self.head);
        for (j, b) in self.blocks.iter().enumerate() {
            conv(&format!("block{j}"), &b.conv);
        }
        conv("tail", &self.tail);
        for (j, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{j}.kappa"), vec![b.slopes.len()], b.slopes.clone()));
        }
        out.push(("gamma".to_string(), vec![1], vec![self.gamma]));
        out
    }

    /// Mutable views of every parameter array, in [`Self::named_arrays`] order.
    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let ResDNetParams {
            head,
            blocks,
            tail,
            gamma,
            ..
        } = self;
        let mut slopes: Vec<&mut [f64]> = Vec::new();
        out.push(&mut head.raw);
        out.push(&mut head.scale);
        out.push(&mut head.bias);
        for b in blocks.iter_mut() {
            out.push(&mut b.conv.raw);
            out.push(&mut b.conv.scale);
            out.push(&mut b.conv.bias);
            slopes.push(&mut b.slopes);
        }
        out.push(&mut tail.raw);
        out.push(&mut tail.scale);
        out.push(&mut tail.bias);
        out.extend(slopes);
        out.push(std::slice::from_mut(gamma));
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.named_arrays().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// Trainable scalar counts per parameter group.
    pub fn parameter_breakdown(&self) -> Vec<(&'static str, usize)> {
        let blocks = |f: fn(&NonlinearBlock) -> usize| self.blocks.iter().map(f).sum::<usize>();
        vec![
            ("head.u", self.head.raw.len()),
            ("head.s", self.head.scale.len()),
            ("head.bias", self.head.bias.len()),
            ("blocks.u", blocks(|b| b.conv.raw.len())),
            ("blocks.s", blocks(|b| b.conv.scale.len())),
            ("blocks.bias", blocks(|b| b.conv.bias.len())),
            ("blocks.kappa", blocks(|b| b.slopes.len())),
            ("tail.u", self.tail.raw.len()),
            ("tail.s", self.tail.scale.len()),
            ("tail.bias", self.tail.bias.len()),
            ("gamma", 1),
        ]
    }

    /// Every parameter array, in [`Self::named_arrays`] order.
    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for c in std::iter::once(&self.head)
            .chain(self.blocks.iter().map(|b| &b.conv))
            .chain(std::iter::once(&self.tail))
        {
            out.extend([&c.raw[..], &c.scale[..], &c.bias[..]]);
        }
        out.extend(self.blocks.iter().map(|b| &b.slopes[..]));
        out.push(std::slice::from_ref(&self.gamma));
        out
    }

    /// `self += alpha·other`, entrywise over all arrays.
    pub fn axpy(&mut self, alpha: f64, other: &ResDNetParams) {
        for (dst, s) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, v) in dst.iter_mut().zip(s.iter()) {
                *d += alpha * v;
            }
        }
    }

    pub fn check_shape(&self) -> Result<()> {
        let f = self.features;
        let conv_ok = |c: &ConvParams, o, i, k, b| {
            c.out_channels == o
                && c.in_channels == i
                && c.kernel == k
                && c.raw.len() == o * i * k * k
                && c.scale.len() == o
                && c.bias.len() == b
        };
        let ok = self.blocks.len() == 2 * self.depth
            && conv_ok(&self.head, f, 3, HEAD_KERNEL, f)
            && conv_ok(&self.tail, f, 3, TAIL_KERNEL, 3)
            && self
                .blocks
                .iter()
                .all(|b| b.slopes.len() == f && conv_ok(&b.conv, f, f, BLOCK_KERNEL, f));
        if ok {
            Ok(())
        } else {
            shape_err("denoiser parameters are internally inconsistent")
        }
    }
}

/// `ε = e^γ·σ·sqrt(N−1)` for a tensor of `n` entries.
pub fn projection_radius(sigma: f64, gamma: f64, n: usize) -> f64 {
    gamma.exp() * sigma * ((n as f64) - 1.0).max(0.0).sqrt()
}

/// Orthogonal projection of `e` onto the ℓ₂ ball of radius `ε(σ, γ)`.
pub fn project_noise(e: &ImageTensor, sigma: f64, gamma: f64) -> ImageTensor {
    let eps = projection_radius(sigma, gamma, e.len());
    let norm = e.norm();
    if norm <= eps {
        e.clone()
    } else {
        e.scale(eps / norm)
    }
}

/// Adjoint of [`project_noise`]: gradients with respect to `e`, `σ` and `γ`.
/// Inside the ball (boundary included) the layer is the identity.
pub fn project_noise_backward(
    grad_out: &ImageTensor,
    e: &ImageTensor,
    sigma: f64,
    gamma: f64,
) -> Result<(ImageTensor, f64, f64)> {
    grad_out.check_same_shape(e, "projection backward")?;
    let eps = projection_radius(sigma, gamma, e.len());
    let norm = e.norm();
    if norm <= eps {
        return Ok((grad_out.clone(), 0.0, 0.0));
    }
    let unit = e.scale(1.0 / norm);
    let along = unit.dot(grad_out);
    let mut g = grad_out.clone();
    g.axpy(-along, &unit);
    let g_sigma = along * gamma.exp() * ((e.len() as f64) - 1.0).max(0.0).sqrt();
    Ok((g.scale(eps / norm), g_sigma, along * eps))
}

/// Activations retained by [`resdnet_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenoiseCache {
    input: ImageTensor,
    sigma: f64,
    head: FilterBank,
    blocks: Vec<FilterBank>,
    tail: FilterBank,
    /// Input of each block's PReLU.
    pre_act: Vec<ImageTensor>,
    /// Output of each block's PReLU, the input of its convolution.
    act: Vec<ImageTensor>,
    trunk: ImageTensor,
    residual: ImageTensor,
    residual_norm: f64,
    eps: f64,
    pre_clip: ImageTensor,
}

impl DenoiseCache {
    pub fn input(&self) -> &ImageTensor {
        &self.input
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Output of the projection layer before it is subtracted from the input.
    pub fn projected(&self) -> ImageTensor {
        self.input.sub(&self.pre_clip)
    }

    pub fn projection_radius(&self) -> f64 {
        self.eps
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }
}

/// Gradients of a denoiser evaluation.
#[derive(Debug, Clone)]
pub struct DenoiseGrads {
    pub input: ImageTensor,
    pub params: ResDNetParams,
    pub sigma: f64,
}

/// Runs the denoiser and keeps everything the backward pass needs.
pub fn resdnet_forward(
    input: &ImageTensor,
    sigma: f64,
    params: &ResDNetParams,
) -> Result<(ImageTensor, DenoiseCache)> {
    let (out, cache) = forward_impl(input, sigma, params, Precision::F64, true)?;
    Ok((out, cache.expect("cache requested")))
}

/// Inference-only evaluation; drops intermediates as it goes.
pub fn denoise(
    input: &ImageTensor,
    sigma: f64,
    params: &ResDNetParams,
    precision: Precision,
) -> Result<ImageTensor> {
    Ok(forward_impl(input, sigma, params, precision, false)?.0)
}

fn forward_impl(
    input: &ImageTensor,
    sigma: f64,
    params: &ResDNetParams,
    precision: Precision,
    keep: bool,
) -> Result<(ImageTensor, Option<DenoiseCache>)> {
    if input.channels() != 3 {
        return shape_err(format!(
            "denoiser expects 3 channels, got {}",
            input.channels()
        ));
    }
    if !(sigma >= 0.0) {
        return arg_err(format!("noise level must be non-negative, got {sigma}"));
    }
    params.check_shape()?;
    let p = precision;
    let head = p.apply_bank(params.head.materialize()?);
    let blocks = params
        .blocks
        .iter()
        .map(|b| b.conv.materialize().map(|f| p.apply_bank(f)))
        .collect::<Result<Vec<_>>>()?;
    let tail = p.apply_bank(params.tail.materialize()?);

    let x = p.apply(input.clone());
    let mut h = p.apply(conv2d(&x, &head)?);
    let mut pre_act = Vec::new();
    let mut act = Vec::new();
    for (pair, fb) in blocks.chunks_exact(2).enumerate() {
        let shortcut = h.clone();
        let mut t = h;
        for (j, bank) in fb.iter().enumerate() {
            let block = &params.blocks[2 * pair + j];
            let a = p.apply(prelu(&t, &block.slopes)?);
            let c = p.apply(conv2d(&a, bank)?);
            if keep {
                pre_act.push(t);
                act.push(a);
            }
            t = c;
        }
        t.axpy(1.0, &shortcut);
        h = p.apply(t);
    }
    let residual = p.apply(conv_transpose2d(&h, &tail)?);
    let eps = projection_radius(sigma, params.gamma, residual.len());
    let residual_norm = residual.norm();
    let projected = if residual_norm <= eps {
        residual.clone()
    } else {
        residual.scale(eps / residual_norm)
    };
    let pre_clip = p.apply(x.sub(&projected));
    let out = clip(&pre_clip, 0.0, INTENSITY_MAX)?;
    let cache = keep.then(|| DenoiseCache {
        input: x,
        sigma,
        head,
        blocks,
        tail,
        pre_act,
        act,
        trunk: h,
        residual,
        residual_norm,
        eps,
        pre_clip,
    });
    Ok((out, cache))
}

/// Reverse-mode pass matching a [`resdnet_forward`] call.
pub fn resdnet_backward(
    grad_out: &ImageTensor,
    cache: &DenoiseCache,
    params: &ResDNetParams,
) -> Result<DenoiseGrads> {
    grad_out.check_same_shape(&cache.input, "denoiser backward")?;
    if cache.blocks.len() != params.blocks.len() || cache.act.len() != params.blocks.len() {
        return shape_err("denoiser cache does not match the parameters");
    }
    let g_pre = clip_backward(grad_out, &cache.pre_clip, 0.0, INTENSITY_MAX)?;
    let mut g_input = g_pre.clone();
    // out = x − P(r)
    let g_proj = g_pre.scale(-1.0);

    let (g_res, g_sigma, g_gamma) =
        project_noise_backward(&g_proj, &cache.residual, cache.sigma, params.gamma)?;

    let tail = conv_transpose2d_backward(&g_res, &cache.trunk, &cache.tail)?;
    let mut grads = params.zeros_like();
    grads.gamma = g_gamma;
    grads.tail = params.tail.pull_back(&tail.weights, tail.bias)?;

    let mut g_h = tail.input;
    for pair in (0..params.depth).rev() {
        // branch gradient, shortcut passes g_h straight through
        let mut g_t = g_h.clone();
        for j in (0..2).rev() {
            let idx = 2 * pair + j;
            let conv = conv2d_backward(&g_t, &cache.act[idx], &cache.blocks[idx])?;
            grads.blocks[idx].conv = params.blocks[idx].conv.pull_back(&conv.weights, conv.bias)?;
            let (g_a, g_k) = prelu_backward(&conv.input, &cache.pre_act[idx], &params.blocks[idx].slopes)?;
            grads.blocks[idx].slopes = g_k;
            g_t = g_a;
        }
        g_h.axpy(1.0, &g_t);
    }
    let head = conv2d_backward(&g_h, &cache.input, &cache.head)?;
    grads.head = params.head.pull_back(&head.weights, head.bias)?;
    g_input.axpy(1.0, &head.input);

    Ok(DenoiseGrads {
        input: g_input,
        params: grads,
        sigma: g_sigma,
    })
}
