//! Reference majorization–minimization for the demosaicking objective
//! `Q(x) = ‖y − Mx‖²/(2σ²) + φ(x)` with a quadratic prior `φ(x) = λ‖x‖²`.
//!
//! The data term is majorized at `x₀` by adding
//! `d(x, x₀) = (x−x₀)ᵀ(αI − M)(x−x₀)/(2σ²)`, which is positive definite for
//! `α > 1`. The resulting surrogate is a denoising objective
//! `α‖x − z‖²/(2σ²) + φ(x) + c` with `z = x₀ + (y − Mx₀)/α`; at `α = 1`,
//! `z = y + (I − M)x₀`.
//!
//! These routines are exact references for the math the learned cascade
//! imitates; they are not used on the learned path.

use crate::cfa::MosaicObservation;
use crate::error::{arg_err, Result};
use crate::tensor::ImageTensor;

/// `φ(x) = λ‖x‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPrior {
    pub lambda: f64,
}

impl QuadraticPrior {
    pub fn value(&self, x: &ImageTensor) -> f64 {
        self.lambda * x.norm_sq()
    }
}

fn masked(x: &ImageTensor, y: &MosaicObservation) -> ImageTensor {
    let p = y.pattern();
    let (h, w, c) = x.shape();
    ImageTensor::from_fn(h, w, c, |r, col, ch| {
        if p.samples(r, col, ch) {
            x.at(r, col, ch)
        } else {
            0.0
        }
    })
}

/// `Q(x)`.
pub fn objective_value(x: &ImageTensor, y: &MosaicObservation, sigma: f64, prior: QuadraticPrior) -> f64 {
    let resid = y.data().sub(&masked(x, y));
    resid.norm_sq() / (2.0 * sigma * sigma) + prior.value(x)
}

/// `d(x, x₀) = (x−x₀)ᵀ(αI − M)(x−x₀)/(2σ²)`.
pub fn majorizer_gap(x: &ImageTensor, x0: &ImageTensor, y: &MosaicObservation, sigma: f64, alpha: f64) -> f64 {
    let diff = x.sub(x0);
    let quad = alpha * diff.norm_sq() - masked(&diff, y).norm_sq();
    quad / (2.0 * sigma * sigma)
}

/// Centre of the surrogate's denoising form, `x₀ + (y − Mx₀)/α`.
pub fn surrogate_center(x0: &ImageTensor, y: &MosaicObservation, alpha: f64) -> ImageTensor {
    let innovation = y.data().sub(&masked(x0, y));
    let mut z = x0.clone();
    z.axpy(1.0 / alpha, &innovation);
    z
}

/// `Q̃(x; x₀) = α‖x − z‖²/(2σ²) + φ(x) + c`, with `c` chosen so `Q̃(x₀; x₀) = Q(x₀)`.
pub fn surrogate_value(
    x: &ImageTensor,
    x0: &ImageTensor,
    y: &MosaicObservation,
    sigma: f64,
    alpha: f64,
    prior: QuadraticPrior,
) -> f64 {
    let two_var = 2.0 * sigma * sigma;
    let z = surrogate_center(x0, y, alpha);
    let innovation = y.data().sub(&masked(x0, y)).norm_sq();
    let c = innovation * (1.0 - 1.0 / alpha) / two_var;
    alpha * x.sub(&z).norm_sq() / two_var + prior.value(x) + c
}

/// Exact MM iterates `x⁽ᵗ⁺¹⁾ = argmin Q̃(·; x⁽ᵗ⁾) = z⁽ᵗ⁾ / (1 + 2λσ²/α)`,
/// starting from `x⁽⁰⁾ = y`. Returns all `steps + 1` iterates.
pub fn mm_reference_iterate(
    y: &MosaicObservation,
    sigma: f64,
    alpha: f64,
    lambda: f64,
    steps: usize,
) -> Result<Vec<ImageTensor>> {
    if !(alpha > 1.0) {
        return arg_err(format!("majorizer needs alpha > 1, got {alpha}"));
    }
    if !(lambda >= 0.0) || !(sigma > 0.0) {
        return arg_err("need lambda >= 0 and sigma > 0");
    }
    let shrink = 1.0 / (1.0 + 2.0 * lambda * sigma * sigma / alpha);
    let mut iterates = Vec::with_capacity(steps + 1);
    iterates.push(y.data().clone());
    for t in 0..steps {
        let z = surrogate_center(&iterates[t], y, alpha);
        iterates.push(z.scale(shrink));
    }
    Ok(iterates)
}
