//! Dense reference computations shared by the integration tests.
#![allow(dead_code)]

use joint_demosaick::cfa::{CfaPattern, MosaicObservation};
use joint_demosaick::ImageTensor;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> ImageTensor {
    let data = (0..h * w * 3).map(|_| rng.random_range(lo..hi)).collect();
    ImageTensor::from_vec(h, w, 3, data).unwrap()
}

/// RGGB sampling written out by hand, in row-major (row, col, channel) order.
pub fn rggb_mask(h: usize, w: usize) -> Vec<f64> {
    let cell = [[0, 1], [1, 2]];
    let mut m = Vec::with_capacity(h * w * 3);
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                m.push(if cell[r % 2][c % 2] == ch { 1.0 } else { 0.0 });
            }
        }
    }
    m
}

/// Mask read off a library pattern, for layouts not spelled out above.
pub fn pattern_mask(p: &CfaPattern, h: usize, w: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(h * w * 3);
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                m.push(if p.samples(r, c, ch) { 1.0 } else { 0.0 });
            }
        }
    }
    m
}

pub fn vector(x: &ImageTensor) -> DVector<f64> {
    DVector::from_column_slice(x.data())
}

/// `(x−x₀)ᵀ(αI − M)(x−x₀)/(2σ²)` as a dense quadratic form.
pub fn dense_gap(x: &ImageTensor, x0: &ImageTensor, mask: &[f64], sigma: f64, alpha: f64) -> f64 {
    let n = mask.len();
    let a = DMatrix::<f64>::identity(n, n) * alpha - DMatrix::from_diagonal(&DVector::from_column_slice(mask));
    let d = vector(x) - vector(x0);
    (d.transpose() * a * &d)[(0, 0)] / (2.0 * sigma * sigma)
}

/// `‖y − Mx‖²/(2σ²) + λ‖x‖²` with a dense `M`.
pub fn dense_objective(x: &ImageTensor, y: &MosaicObservation, mask: &[f64], sigma: f64, lambda: f64) -> f64 {
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(mask));
    let xv = vector(x);
    let r = vector(y.data()) - m * &xv;
    r.norm_squared() / (2.0 * sigma * sigma) + lambda * xv.norm_squared()
}

/// Solves `(MᵀM/σ² + 2λI)x = Mᵀy/σ²`, the stationarity condition of the quadratic objective.
pub fn dense_minimizer(y: &MosaicObservation, mask: &[f64], sigma: f64, lambda: f64) -> DVector<f64> {
    let n = mask.len();
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(mask));
    let s2 = sigma * sigma;
    let a = m.transpose() * &m / s2 + DMatrix::<f64>::identity(n, n) * (2.0 * lambda);
    let b = m.transpose() * vector(y.data()) / s2;
    a.lu().solve(&b).expect("system is positive definite")
}

/// Iterations needed for the MM map to contract an initial error by `factor`.
pub fn mm_steps_for(alpha: f64, lambda: f64, sigma: f64, factor: f64) -> usize {
    let shrink = 1.0 / (1.0 + 2.0 * lambda * sigma * sigma / alpha);
    (factor.ln() / shrink.ln()).ceil() as usize + 10
}
