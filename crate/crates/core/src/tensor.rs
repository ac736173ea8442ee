//! Dense image tensors and the handful of kernels the denoiser is built from.
//!
//! Every forward kernel here has a hand-written adjoint. Convolutions use the
//! correlation convention (no kernel flip) over a reflexively padded input, so
//! the output always has the spatial size of the input.
//!
//! Row-parallel loops split work into fixed row chunks and reduce partial sums
//! in chunk order, so results do not depend on the size of the thread pool.

use rayon::prelude::*;

use crate::error::{arg_err, shape_err, Error, Result};

/// Rows per work unit in the parallel weight-gradient reduction.
const ROW_CHUNK: usize = 16;

/// An `height × width × channels` array stored row-major in
/// `(row, column, channel)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "tensor dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return shape_err(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(row, col, channel)` at every entry.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    /// Total number of scalar entries.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &ImageTensor, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            ))
        }
    }

    pub fn dot(&self, other: &ImageTensor) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Numeric(format!("{what} contains NaN or infinity")))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageTensor {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ImageTensor, f: impl Fn(f64, f64) -> f64) -> ImageTensor {
        debug_assert!(self.same_shape(other));
        self.with_data(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ImageTensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &ImageTensor) -> ImageTensor {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageTensor) -> ImageTensor {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> ImageTensor {
        self.map(|v| v * factor)
    }

    /// Spatial sub-window `[y0, y0+h) × [x0, x0+w)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<ImageTensor> {
        if y0 + h > self.height || x0 + w > self.width || h == 0 || w == 0 {
            return Err(Error::Dimension(format!(
                "crop {h}x{w} at ({y0},{x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(h * w * c);
        for y in y0..y0 + h {
            let start = self.index(y, x0, 0);
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Ok(ImageTensor {
            height: h,
            width: w,
            channels: c,
            data,
        })
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> ImageTensor {
        let (h, w, c) = self.shape();
        ImageTensor::from_fn(h, w, c, |y, x, ch| self.at(y, w - 1 - x, ch))
    }

    /// Mirror top-bottom.
    pub fn flip_vertical(&self) -> ImageTensor {
        let (h, w, c) = self.shape();
        ImageTensor::from_fn(h, w, c, |y, x, ch| self.at(h - 1 - y, x, ch))
    }

    fn with_data(&self, data: Vec<f64>) -> ImageTensor {
        debug_assert_eq!(data.len(), self.data.len());
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data,
        }
    }
}

/// A bank of `out_channels` correlation filters over `in_channels` inputs.
///
/// `weights` is laid out `[out][in][kernel_h][kernel_w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl FilterBank {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kernel_h % 2 == 0 || kernel_w % 2 == 0 {
            return arg_err(format!("kernel {kernel_h}x{kernel_w} must be odd-sized"));
        }
        if out_channels == 0 || in_channels == 0 {
            return arg_err("filter bank needs at least one channel each way");
        }
        if weights.len() != out_channels * in_channels * kernel_h * kernel_w {
            return shape_err(format!(
                "weights length {} does not match {out_channels}x{in_channels}x{kernel_h}x{kernel_w}",
                weights.len()
            ));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            weights: vec![0.0; out_channels * in_channels * kernel_h * kernel_w],
            bias: vec![0.0; out_channels],
        }
    }

    /// Number of weights in one output filter (`in × kh × kw`).
    pub fn filter_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, dy: usize, dx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.kernel_h + dy) * self.kernel_w + dx]
    }

    /// Weights reordered to `[dy][dx][in][out]`, the layout the inner loops want.
    fn spatial_major(&self) -> Vec<f64> {
        let (o_n, i_n, kh, kw) = (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w);
        let mut out = vec![0.0; self.weights.len()];
        for o in 0..o_n {
            for i in 0..i_n {
                for dy in 0..kh {
                    for dx in 0..kw {
                        out[((dy * kw + dx) * i_n + i) * o_n + o] = self.weight(o, i, dy, dx);
                    }
                }
            }
        }
        out
    }

    fn from_spatial_major(&self, spatial: &[f64]) -> Vec<f64> {
        let (o_n, i_n, kh, kw) = (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w);
        let mut out = vec![0.0; spatial.len()];
        for dy in 0..kh {
            for dx in 0..kw {
                for i in 0..i_n {
                    for o in 0..o_n {
                        out[((o * i_n + i) * kh + dy) * kw + dx] =
                            spatial[((dy * kw + dx) * i_n + i) * o_n + o];
                    }
                }
            }
        }
        out
    }
}

/// Maps a possibly out-of-range index onto `0..n` by mirroring about the
/// edge samples without repeating them (`-k ↦ k`, `n-1+k ↦ n-1-k`).
/// Offsets larger than `n - 1` keep folding back and forth.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

fn pad_map(n: usize, pad: usize) -> Vec<usize> {
    (0..n + 2 * pad)
        .map(|p| reflect_index(p as isize - pad as isize, n))
        .collect()
}

fn pad_hw(input: &ImageTensor, pad_h: usize, pad_w: usize) -> ImageTensor {
    let (h, w, c) = input.shape();
    let rows = pad_map(h, pad_h);
    let cols = pad_map(w, pad_w);
    let (hp, wp) = (h + 2 * pad_h, w + 2 * pad_w);
    let mut data = Vec::with_capacity(hp * wp * c);
    for &sy in &rows {
        for &sx in &cols {
            let s = input.index(sy, sx, 0);
            data.extend_from_slice(&input.data[s..s + c]);
        }
    }
    ImageTensor {
        height: hp,
        width: wp,
        channels: c,
        data,
    }
}

/// Adjoint of [`pad_hw`]: every padded entry's gradient lands on its source pixel.
fn fold_hw(padded: &ImageTensor, h: usize, w: usize, pad_h: usize, pad_w: usize) -> ImageTensor {
    let c = padded.channels;
    let rows = pad_map(h, pad_h);
    let cols = pad_map(w, pad_w);
    let mut out = ImageTensor::zeros(h, w, c);
    for (py, &sy) in rows.iter().enumerate() {
        for (px, &sx) in cols.iter().enumerate() {
            let src = padded.index(py, px, 0);
            let dst = out.index(sy, sx, 0);
            for k in 0..c {
                out.data[dst + k] += padded.data[src + k];
            }
        }
    }
    out
}

/// Mirror-pads every spatial border by `pad` pixels.
pub fn reflexive_pad(input: &ImageTensor, pad: usize) -> Result<ImageTensor> {
    if pad >= input.height.min(input.width) {
        return Err(Error::Dimension(format!(
            "pad {pad} too large for {}x{} image",
            input.height, input.width
        )));
    }
    Ok(pad_hw(input, pad, pad))
}

/// Adjoint of [`reflexive_pad`]: folds border gradients back onto their sources.
pub fn reflexive_pad_backward(
    grad_out: &ImageTensor,
    input_shape: (usize, usize, usize),
    pad: usize,
) -> Result<ImageTensor> {
    let (h, w, c) = input_shape;
    if grad_out.shape() != (h + 2 * pad, w + 2 * pad, c) {
        return shape_err(format!(
            "padded gradient {:?} does not match input {input_shape:?} with pad {pad}",
            grad_out.shape()
        ));
    }
    if pad >= h.min(w) {
        return Err(Error::Dimension(format!("pad {pad} too large for {h}x{w} image")));
    }
    Ok(fold_hw(grad_out, h, w, pad, pad))
}

/// Same-size correlation of a reflexively padded input with `filters`, plus bias.
pub fn conv2d(input: &ImageTensor, filters: &FilterBank) -> Result<ImageTensor> {
    if input.channels != filters.in_channels {
        return shape_err(format!(
            "conv2d expects {} input channels, got {}",
            filters.in_channels, input.channels
        ));
    }
    check_bias(&filters.bias, filters.out_channels, "conv2d")?;
    Ok(correlate(input, filters, &filters.spatial_major(), Some(&filters.bias)))
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: ImageTensor,
    /// `[out][in][kh][kw]`, matching [`FilterBank::weights`].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv2d_backward(
    grad_out: &ImageTensor,
    input: &ImageTensor,
    filters: &FilterBank,
) -> Result<ConvGrads> {
    if input.channels != filters.in_channels
        || grad_out.shape() != (input.height, input.width, filters.out_channels)
    {
        return shape_err(format!(
            "conv2d backward: grad {:?} input {:?} filters {}->{}",
            grad_out.shape(),
            input.shape(),
            filters.in_channels,
            filters.out_channels
        ));
    }
    let spatial = filters.spatial_major();
    let input_grad = correlate_adjoint(grad_out, filters, &spatial, None);
    let wgrad = weight_gradient(input, grad_out, filters);
    Ok(ConvGrads {
        input: input_grad,
        weights: filters.from_spatial_major(&wgrad),
        bias: channel_sums(grad_out),
    })
}

/// Same-size transposed convolution: the exact adjoint of the bias-free
/// [`conv2d`] map. Consumes `filters.out_channels` channels and produces
/// `filters.in_channels`; `bias` must have `in_channels` entries.
pub fn conv_transpose2d(input: &ImageTensor, filters: &FilterBank) -> Result<ImageTensor> {
    if input.channels != filters.out_channels {
        return shape_err(format!(
            "conv_transpose2d expects {} input channels, got {}",
            filters.out_channels, input.channels
        ));
    }
    check_bias(&filters.bias, filters.in_channels, "conv_transpose2d")?;
    Ok(correlate_adjoint(
        input,
        filters,
        &filters.spatial_major(),
        Some(&filters.bias),
    ))
}

pub fn conv_transpose2d_backward(
    grad_out: &ImageTensor,
    input: &ImageTensor,
    filters: &FilterBank,
) -> Result<ConvGrads> {
    if input.channels != filters.out_channels
        || grad_out.shape() != (input.height, input.width, filters.in_channels)
    {
        return shape_err(format!(
            "conv_transpose2d backward: grad {:?} input {:?} filters {}->{}",
            grad_out.shape(),
            input.shape(),
            filters.out_channels,
            filters.in_channels
        ));
    }
    let spatial = filters.spatial_major();
    // y = Kᵀb + c, so ∂/∂b = K g and ∂/∂w mirrors the forward-conv weight gradient
    // with the roles of input and output gradient exchanged.
    let input_grad = correlate(grad_out, filters, &spatial, None);
    let wgrad = weight_gradient(grad_out, input, filters);
    Ok(ConvGrads {
        input: input_grad,
        weights: filters.from_spatial_major(&wgrad),
        bias: channel_sums(grad_out),
    })
}

fn check_bias(bias: &[f64], expected: usize, op: &str) -> Result<()> {
    if bias.len() != expected {
        return shape_err(format!(
            "{op}: bias length {} should be {expected}",
            bias.len()
        ));
    }
    Ok(())
}

fn channel_sums(t: &ImageTensor) -> Vec<f64> {
    let mut sums = vec![0.0; t.channels];
    for px in t.data.chunks_exact(t.channels) {
        for (s, v) in sums.iter_mut().zip(px) {
            *s += v;
        }
    }
    sums
}

/// out[y,x,o] = bias[o] + Σ_{i,dy,dx} w[o,i,dy,dx] · pad(input)[y+dy, x+dx, i]
fn correlate(
    input: &ImageTensor,
    filters: &FilterBank,
    spatial: &[f64],
    bias: Option<&[f64]>,
) -> ImageTensor {
    let (h, w, _) = input.shape();
    let (o_n, i_n, kh, kw) = (filters.out_channels, filters.in_channels, filters.kernel_h, filters.kernel_w);
    let padded = pad_hw(input, kh / 2, kw / 2);
    let wp = padded.width;
    let mut out = ImageTensor::zeros(h, w, o_n);
    out.data
        .par_chunks_mut(w * o_n)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let acc = &mut row[x * o_n..(x + 1) * o_n];
                if let Some(b) = bias {
                    acc.copy_from_slice(b);
                }
                for dy in 0..kh {
                    for dx in 0..kw {
                        let src = ((y + dy) * wp + x + dx) * i_n;
                        let px = &padded.data[src..src + i_n];
                        let wblock = &spatial[(dy * kw + dx) * i_n * o_n..(dy * kw + dx + 1) * i_n * o_n];
                        for (i, &v) in px.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let wrow = &wblock[i * o_n..(i + 1) * o_n];
                            for (a, &wv) in acc.iter_mut().zip(wrow) {
                                *a += wv * v;
                            }
                        }
                    }
                }
            }
        });
    out
}

/// Adjoint of the bias-free [`correlate`] map, optionally plus a bias over
/// the `in` channels. Computed in gather form on the padded grid, then folded.
fn correlate_adjoint(
    grad: &ImageTensor,
    filters: &FilterBank,
    spatial: &[f64],
    bias: Option<&[f64]>,
) -> ImageTensor {
    let (h, w, _) = grad.shape();
    let (o_n, i_n, kh, kw) = (filters.out_channels, filters.in_channels, filters.kernel_h, filters.kernel_w);
    let (ph, pw) = (kh / 2, kw / 2);
    let (hp, wp) = (h + 2 * ph, w + 2 * pw);
    let mut padded = ImageTensor::zeros(hp, wp, i_n);
    padded
        .data
        .par_chunks_mut(wp * i_n)
        .enumerate()
        .for_each(|(py, row)| {
            for px in 0..wp {
                let acc = &mut row[px * i_n..(px + 1) * i_n];
                for dy in 0..kh {
                    // output row y = py - dy must lie in 0..h
                    let Some(y) = py.checked_sub(dy).filter(|&y| y < h) else {
                        continue;
                    };
                    for dx in 0..kw {
                        let Some(x) = px.checked_sub(dx).filter(|&x| x < w) else {
                            continue;
                        };
                        let g = &grad.data[(y * w + x) * o_n..(y * w + x + 1) * o_n];
                        let wblock = &spatial[(dy * kw + dx) * i_n * o_n..(dy * kw + dx + 1) * i_n * o_n];
                        for (i, a) in acc.iter_mut().enumerate() {
                            let wrow = &wblock[i * o_n..(i + 1) * o_n];
                            let mut s = 0.0;
                            for (&wv, &gv) in wrow.iter().zip(g) {
                                s += wv * gv;
                            }
                            *a += s;
                        }
                    }
                }
            }
        });
    let mut out = fold_hw(&padded, h, w, ph, pw);
    if let Some(b) = bias {
        for px in out.data.chunks_exact_mut(i_n) {
            for (v, bv) in px.iter_mut().zip(b) {
                *v += bv;
            }
        }
    }
    out
}

/// ∂/∂w[dy][dx][i][o] of Σ grad[y,x,o] · pad(input)[y+dy,x+dx,i] in spatial-major layout.
fn weight_gradient(input: &ImageTensor, grad: &ImageTensor, filters: &FilterBank) -> Vec<f64> {
    let (h, w, _) = input.shape();
    let (o_n, i_n, kh, kw) = (filters.out_channels, filters.in_channels, filters.kernel_h, filters.kernel_w);
    let padded = pad_hw(input, kh / 2, kw / 2);
    let wp = padded.width;
    let n_weights = kh * kw * i_n * o_n;
    let partials: Vec<Vec<f64>> = (0..h.div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = vec![0.0; n_weights];
            for y in chunk * ROW_CHUNK..((chunk + 1) * ROW_CHUNK).min(h) {
                for x in 0..w {
                    let g = &grad.data[(y * w + x) * o_n..(y * w + x + 1) * o_n];
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let src = ((y + dy) * wp + x + dx) * i_n;
                            let px = &padded.data[src..src + i_n];
                            let base = (dy * kw + dx) * i_n * o_n;
                            for (i, &v) in px.iter().enumerate() {
                                if v == 0.0 {
                                    continue;
                                }
                                let arow = &mut acc[base + i * o_n..base + (i + 1) * o_n];
                                for (a, &gv) in arow.iter_mut().zip(g) {
                                    *a += v * gv;
                                }
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n_weights];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Parametric rectifier `max(0,x) + κ_c·min(0,x)` with one slope per channel.
pub fn prelu(input: &ImageTensor, slopes: &[f64]) -> Result<ImageTensor> {
    if slopes.len() != input.channels {
        return shape_err(format!(
            "prelu: {} slopes for {} channels",
            slopes.len(),
            input.channels
        ));
    }
    let mut out = input.clone();
    for px in out.data.chunks_exact_mut(input.channels) {
        for (v, &k) in px.iter_mut().zip(slopes) {
            if *v < 0.0 {
                *v *= k;
            }
        }
    }
    Ok(out)
}

/// Returns `(∂/∂input, ∂/∂slopes)`.
pub fn prelu_backward(
    grad_out: &ImageTensor,
    input: &ImageTensor,
    slopes: &[f64],
) -> Result<(ImageTensor, Vec<f64>)> {
    grad_out.check_same_shape(input, "prelu backward")?;
    if slopes.len() != input.channels {
        return shape_err("prelu backward: slope length mismatch");
    }
    let c = input.channels;
    let mut gin = grad_out.clone();
    let mut gk = vec![0.0; c];
    for (gpx, xpx) in gin.data.chunks_exact_mut(c).zip(input.data.chunks_exact(c)) {
        for ch in 0..c {
            let x = xpx[ch];
            if x < 0.0 {
                gk[ch] += x * gpx[ch];
                gpx[ch] *= slopes[ch];
            }
        }
    }
    Ok((gin, gk))
}

/// Elementwise clamp to `[lo, hi]`.
pub fn clip(input: &ImageTensor, lo: f64, hi: f64) -> Result<ImageTensor> {
    if lo >= hi {
        return arg_err(format!("clip bounds [{lo}, {hi}] are empty"));
    }
    Ok(input.map(|v| v.clamp(lo, hi)))
}

/// Passes the gradient strictly inside `(lo, hi)`; zero at and beyond the bounds.
pub fn clip_backward(
    grad_out: &ImageTensor,
    input: &ImageTensor,
    lo: f64,
    hi: f64,
) -> Result<ImageTensor> {
    grad_out.check_same_shape(input, "clip backward")?;
    Ok(grad_out.zip_map(input, |g, x| if x > lo && x < hi { g } else { 0.0 }))
}

/// The forward inputs of one kernel invocation, kept for its adjoint.
#[derive(Debug, Clone)]
pub enum OpCache {
    ReflexivePad {
        input_shape: (usize, usize, usize),
        pad: usize,
    },
    Conv2d {
        input: ImageTensor,
        filters: FilterBank,
    },
    ConvTranspose2d {
        input: ImageTensor,
        filters: FilterBank,
    },
    Prelu {
        input: ImageTensor,
        slopes: Vec<f64>,
    },
    Clip {
        input: ImageTensor,
        lo: f64,
        hi: f64,
    },
}

/// Gradients produced by [`adjoint_of`]. Parameter slots are `None` for
/// parameter-free kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct OpGrads {
    pub input: ImageTensor,
    pub weights: Option<Vec<f64>>,
    pub bias: Option<Vec<f64>>,
    pub slopes: Option<Vec<f64>>,
}

/// Reverse-mode step for any single kernel in this module.
pub fn adjoint_of(cache: &OpCache, grad_out: &ImageTensor) -> Result<OpGrads> {
    let plain = |input| OpGrads {
        input,
        weights: None,
        bias: None,
        slopes: None,
    };
    match cache {
        OpCache::ReflexivePad { input_shape, pad } => {
            Ok(plain(reflexive_pad_backward(grad_out, *input_shape, *pad)?))
        }
        OpCache::Conv2d { input, filters } => {
            let g = conv2d_backward(grad_out, input, filters)?;
            Ok(OpGrads {
                input: g.input,
                weights: Some(g.weights),
                bias: Some(g.bias),
                slopes: None,
            })
        }
        OpCache::ConvTranspose2d { input, filters } => {
            let g = conv_transpose2d_backward(grad_out, input, filters)?;
            Ok(OpGrads {
                input: g.input,
                weights: Some(g.weights),
                bias: Some(g.bias),
                slopes: None,
            })
        }
        OpCache::Prelu { input, slopes } => {
            let (gi, gk) = prelu_backward(grad_out, input, slopes)?;
            Ok(OpGrads {
                input: gi,
                weights: None,
                bias: None,
                slopes: Some(gk),
            })
        }
        OpCache::Clip { input, lo, hi } => Ok(plain(clip_backward(grad_out, input, *lo, *hi)?)),
    }
}
