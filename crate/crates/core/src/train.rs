//! Training: losses, Adam, patch sampling, denoiser pretraining and
//! end-to-end training of the cascade.
//!
//! Batch items are processed in parallel; their gradients are summed in
//! item order, so results do not depend on the number of threads.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cascade::{demosaick, demosaick_backward, demosaick_forward, CascadeParams, SIGMA_FLOOR};
use crate::cfa::{CfaPattern, PatternKind};
use crate::dataset::Dataset;
use crate::error::{arg_err, shape_err, Error, Result};
use crate::metrics::psnr_255;
use crate::modelfile::{save_denoiser, save_model};
use crate::noise::{add_noise, noisy_observation, NoiseSpec};
use crate::resdnet::{denoise, resdnet_backward, resdnet_forward, Precision, ResDNetParams};
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L1,
    Mse,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(LossKind::L1),
            "mse" => Ok(LossKind::Mse),
            _ => arg_err(format!("unknown loss '{s}' (expected l1|mse)")),
        }
    }
}

/// Mean loss over all entries and its gradient with respect to `pred`.
/// The L1 subgradient at a tie is 0.
pub fn loss(pred: &ImageTensor, target: &ImageTensor, kind: LossKind) -> Result<(f64, ImageTensor)> {
    pred.check_same_shape(target, "loss")?;
    let n = pred.len() as f64;
    let diff = pred.sub(target);
    let (value, grad) = match kind {
        LossKind::L1 => (
            diff.data().iter().map(|d| d.abs()).sum::<f64>() / n,
            diff.map(|d| {
                if d > 0.0 {
                    1.0 / n
                } else if d < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                }
            }),
        ),
        LossKind::Mse => (diff.norm_sq() / n, diff.scale(2.0 / n)),
    };
    Ok((value, grad))
}

/// Moment estimates for Adam, one buffer per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for arrays of the given lengths.
    pub fn new(lengths: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<f64>> = lengths.into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    pub fn for_arrays(arrays: &[&[f64]]) -> Self {
        Self::new(arrays.iter().map(|a| a.len()))
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction. Weight decay is added to the
/// gradient as `weight_decay·θ`.
pub fn adam_step(
    mut params: Vec<&mut [f64]>,
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    let consistent = params.len() == grads.len()
        && params.len() == state.m.len()
        && params
            .iter()
            .zip(grads)
            .zip(&state.m)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !consistent {
        return shape_err("optimizer state, parameters and gradients disagree in shape");
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            let gi = g[i] + weight_decay * p[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + state.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Joint,
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Phase::Pretrain),
            "joint" => Ok(Phase::Joint),
            _ => arg_err(format!("unknown phase '{s}' (expected pretrain|joint)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub phase: Phase,
    pub patch_size: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs between learning-rate decays; 0 disables decay.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Random crops drawn from each training image per epoch.
    pub crops_per_image: usize,
    /// Pretraining noise levels are drawn uniformly from this range.
    pub sigma_range: (f64, f64),
    /// Noise level of the pretraining validation set.
    pub val_sigma: f64,
    pub steps: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// i.i.d. noise added to joint-training observations.
    pub noise_sigma: f64,
    pub pattern: PatternKind,
    pub depth: usize,
    pub features: usize,
    pub seed: u64,
    pub val_crops_per_image: usize,
    /// Validate every this many optimizer steps; 0 means once per epoch.
    pub val_every: usize,
    pub checkpoint_every: usize,
    pub checkpoint_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

impl TrainConfig {
    /// Small settings that train on a CPU in minutes.
    pub fn desk(phase: Phase) -> Self {
        Self {
            phase,
            patch_size: 32,
            batch_size: 4,
            lr: 1e-2,
            lr_decay_every: 30,
            lr_decay_factor: 0.1,
            weight_decay: 1e-8,
            epochs: 20,
            crops_per_image: 1,
            sigma_range: (0.0, 15.0),
            val_sigma: 15.0,
            steps: 5,
            sigma_max: 15.0,
            sigma_min: 1.0,
            noise_sigma: 0.0,
            pattern: PatternKind::BayerRggb,
            depth: 1,
            features: 8,
            seed: 0,
            val_crops_per_image: 2,
            val_every: 0,
            checkpoint_every: 0,
            checkpoint_path: None,
            log_path: None,
        }
    }

    /// Full-size network, 180-pixel patches and ten steps.
    pub fn full(phase: Phase) -> Self {
        Self {
            patch_size: 180,
            depth: 5,
            features: 64,
            steps: 10,
            epochs: 100,
            ..Self::desk(phase)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("patch_size", self.patch_size),
            ("batch_size", self.batch_size),
            ("crops_per_image", self.crops_per_image),
            ("val_crops_per_image", self.val_crops_per_image),
            ("steps", self.steps),
            ("depth", self.depth),
            ("features", self.features),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return arg_err(format!("{k} must be positive"));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return arg_err("learning rate must be positive and weight decay non-negative");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return arg_err("lr_decay_factor must lie in (0, 1]");
        }
        let (lo, hi) = self.sigma_range;
        if !(lo >= 0.0 && hi >= lo) || !(self.val_sigma >= 0.0) || !(self.noise_sigma >= 0.0) {
            return arg_err("noise levels must be non-negative with sigma_lo <= sigma_hi");
        }
        if !(self.sigma_min > 0.0 && self.sigma_max >= self.sigma_min) {
            return arg_err("need sigma_max >= sigma_min > 0");
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Argument(format!("bad value '{v}' for {key}")))
        }
        match key {
            "phase" => self.phase = value.parse()?,
            "patch_size" => self.patch_size = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "lr_decay_every" => self.lr_decay_every = num(key, value)?,
            "lr_decay_factor" => self.lr_decay_factor = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "crops_per_image" => self.crops_per_image = num(key, value)?,
            "sigma_lo" => self.sigma_range.0 = num(key, value)?,
            "sigma_hi" => self.sigma_range.1 = num(key, value)?,
            "val_sigma" => self.val_sigma = num(key, value)?,
            "steps" | "k" => self.steps = num(key, value)?,
            "sigma_max" => self.sigma_max = num(key, value)?,
            "sigma_min" => self.sigma_min = num(key, value)?,
            "noise_sigma" => self.noise_sigma = num(key, value)?,
            "pattern" => self.pattern = value.parse()?,
            "depth" => self.depth = num(key, value)?,
            "features" => self.features = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "val_crops_per_image" => self.val_crops_per_image = num(key, value)?,
            "val_every" => self.val_every = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "checkpoint_path" => self.checkpoint_path = Some(value.into()),
            "log_path" => self.log_path = Some(value.into()),
            _ => return arg_err(format!("unknown configuration key '{key}'")),
        }
        Ok(())
    }

    fn lr_at_epoch(&self, epoch: usize) -> f64 {
        match self.lr_decay_every {
            0 => self.lr,
            n => self.lr * self.lr_decay_factor.powi((epoch / n) as i32),
        }
    }
}

/// A training crop; `flipped` is set when any flip was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: ImageTensor,
    pub flipped: bool,
}

/// Seeded source of random crops. Horizontal and vertical flips are
/// applied in the joint phase only.
pub struct PatchSampler<'a> {
    images: Vec<&'a ImageTensor>,
    size: usize,
    batch: usize,
    crops_per_image: usize,
    flips: bool,
    rng: ChaCha8Rng,
}

impl<'a> PatchSampler<'a> {
    pub fn new(data: &'a Dataset, cfg: &TrainConfig) -> Result<Self> {
        let size = cfg.patch_size;
        let mut images = Vec::new();
        for (name, img) in data.entries() {
            if img.height() < size || img.width() < size {
                warn!(
                    "skipping {name}: {}×{} is smaller than the {size}×{size} patch",
                    img.height(),
                    img.width()
                );
            } else {
                images.push(img);
            }
        }
        if images.is_empty() {
            return arg_err("no training image is large enough for the patch size");
        }
        Ok(Self {
            images,
            size,
            batch: cfg.batch_size,
            crops_per_image: cfg.crops_per_image,
            flips: cfg.phase == Phase::Joint,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn num_images(&self) -> usize {
        self.images.len()
    }

    pub fn batches_per_epoch(&self) -> usize {
        (self.images.len() * self.crops_per_image).div_ceil(self.batch)
    }

    fn crop(&mut self, img: &ImageTensor) -> Patch {
        let y0 = self.rng.random_range(0..=img.height() - self.size);
        let x0 = self.rng.random_range(0..=img.width() - self.size);
        let mut image = img.crop(y0, x0, self.size, self.size).expect("crop fits");
        let mut flipped = false;
        if self.flips {
            if self.rng.random_bool(0.5) {
                image = image.flip_horizontal();
                flipped = true;
            }
            if self.rng.random_bool(0.5) {
                image = image.flip_vertical();
                flipped = true;
            }
        }
        Patch { image, flipped }
    }

    /// One shuffled pass: every image contributes `crops_per_image` crops.
    pub fn next_epoch(&mut self) -> Vec<Vec<Patch>> {
        let mut order: Vec<usize> = (0..self.images.len())
            .flat_map(|i| std::iter::repeat_n(i, self.crops_per_image))
            .collect();
        order.shuffle(&mut self.rng);
        let patches: Vec<Patch> = order.into_iter().map(|i| self.crop(self.images[i])).collect();
        let mut batches = Vec::new();
        let mut it = patches.into_iter().peekable();
        while it.peek().is_some() {
            batches.push(it.by_ref().take(self.batch).collect());
        }
        batches
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_psnr: Option<f64>,
}

pub const LOG_HEADER: &str = "step,lr,loss,val_psnr";

impl LogRow {
    pub fn to_csv(&self) -> String {
        let val = self.val_psnr.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!("{},{:e},{:.8},{}", self.step, self.lr, self.loss, val)
    }
}

/// Result of a training run: the parameters with the best validation PSNR.
#[derive(Debug, Clone)]
pub struct Trained<P> {
    pub params: P,
    pub best_val_psnr: f64,
    pub best_step: usize,
    pub log: Vec<LogRow>,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over a combined word
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fixed held-out crops with a noise seed each.
fn validation_set(val: &Dataset, cfg: &TrainConfig) -> Vec<(ImageTensor, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_7a1);
    let size = cfg.patch_size;
    let mut out = Vec::new();
    for img in val.images() {
        if img.height() < size || img.width() < size {
            continue;
        }
        for _ in 0..cfg.val_crops_per_image {
            let y0 = rng.random_range(0..=img.height() - size);
            let x0 = rng.random_range(0..=img.width() - size);
            let crop = img.crop(y0, x0, size, size).expect("crop fits");
            out.push((crop, rng.random()));
        }
    }
    out
}

trait Objective: Sync {
    type Params: Clone + Send + Sync;
    type Grads: Send;

    fn item(&self, params: &Self::Params, clean: &ImageTensor, seed: u64) -> Result<(f64, Self::Grads)>;
    fn grad_arrays(g: &Self::Grads) -> Vec<&[f64]>;
    fn arrays(p: &Self::Params) -> Vec<&[f64]>;
    fn arrays_mut(p: &mut Self::Params) -> Vec<&mut [f64]>;
    fn after_step(_p: &mut Self::Params) {}
    /// Prediction for a validation crop; no state is touched.
    fn predict(&self, params: &Self::Params, clean: &ImageTensor, seed: u64) -> Result<ImageTensor>;
    fn checkpoint(p: &Self::Params, path: &std::path::Path) -> Result<()>;
}

fn mean_val_psnr<O: Objective>(obj: &O, params: &O::Params, set: &[(ImageTensor, u64)]) -> Result<f64> {
    if set.is_empty() {
        return Ok(f64::NAN);
    }
    let scores = set
        .par_iter()
        .map(|(clean, seed)| psnr_255(&obj.predict(params, clean, *seed)?, clean))
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

fn optimise<O: Objective>(
    obj: &O,
    mut params: O::Params,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<Trained<O::Params>> {
    let mut sampler = PatchSampler::new(train, cfg)?;
    let val_set = validation_set(val, cfg);
    if val_set.is_empty() {
        warn!("no validation crops; the final parameters are returned");
    }
    let mut log_file = match &cfg.log_path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            writeln!(f, "{LOG_HEADER}")?;
            Some(f)
        }
        None => None,
    };
    let mut log = Vec::new();
    let mut adam = AdamState::for_arrays(&O::arrays(&params));

    let initial = mean_val_psnr(obj, &params, &val_set)?;
    let mut best = (params.clone(), initial, 0usize);
    info!("initial validation PSNR {initial:.3} dB");
    let per_epoch = sampler.batches_per_epoch();
    let val_every = if cfg.val_every == 0 { per_epoch } else { cfg.val_every };
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        for batch in sampler.next_epoch() {
            step += 1;
            let n = batch.len() as f64;
            let items = batch
                .par_iter()
                .enumerate()
                .map(|(i, patch)| obj.item(&params, &patch.image, mix(cfg.seed, (step as u64) << 16 | i as u64)))
                .collect::<Result<Vec<_>>>()?;
            let mut loss_sum = 0.0;
            let mut total: Vec<Vec<f64>> = O::arrays(&params).iter().map(|a| vec![0.0; a.len()]).collect();
            for (l, g) in &items {
                loss_sum += l;
                for (acc, src) in total.iter_mut().zip(O::grad_arrays(g)) {
                    for (a, s) in acc.iter_mut().zip(src) {
                        *a += s / n;
                    }
                }
            }
            let batch_loss = loss_sum / n;
            if !batch_loss.is_finite() || total.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!("non-finite loss or gradient at step {step}")));
            }
            let grads: Vec<&[f64]> = total.iter().map(|v| v.as_slice()).collect();
            adam_step(O::arrays_mut(&mut params), &grads, &mut adam, lr, cfg.weight_decay)?;
            O::after_step(&mut params);

            let val_psnr = if step % val_every == 0 && !val_set.is_empty() {
                let v = mean_val_psnr(obj, &params, &val_set)?;
                if v > best.1 {
                    best = (params.clone(), v, step);
                }
                info!("step {step} epoch {epoch} loss {batch_loss:.5} val {v:.3} dB");
                Some(v)
            } else {
                None
            };
            let row = LogRow {
                step,
                lr,
                loss: batch_loss,
                val_psnr,
            };
            if let Some(f) = log_file.as_mut() {
                writeln!(f, "{}", row.to_csv())?;
            }
            log.push(row);
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
                if let Some(path) = &cfg.checkpoint_path {
                    O::checkpoint(&params, path)?;
                }
            }
        }
    }
    if let Some(mut f) = log_file {
        f.flush()?;
    }
    if val_set.is_empty() {
        return Ok(Trained {
            params,
            best_val_psnr: f64::NAN,
            best_step: step,
            log,
        });
    }
    Ok(Trained {
        params: best.0,
        best_val_psnr: best.1,
        best_step: best.2,
        log,
    })
}

struct PretrainObjective {
    sigma_range: (f64, f64),
    val_sigma: f64,
}

impl Objective for PretrainObjective {
    type Params = ResDNetParams;
    type Grads = ResDNetParams;

    fn item(&self, params: &ResDNetParams, clean: &ImageTensor, seed: u64) -> Result<(f64, ResDNetParams)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.sigma_range;
        let sigma = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let noisy = add_noise(clean, &NoiseSpec::iid(sigma, rng.random()))?;
        let (out, cache) = resdnet_forward(&noisy, sigma, params)?;
        let (value, grad) = loss(&out, clean, LossKind::Mse)?;
        Ok((value, resdnet_backward(&grad, &cache, params)?.params))
    }

    fn grad_arrays(g: &ResDNetParams) -> Vec<&[f64]> {
        g.arrays()
    }

    fn arrays(p: &ResDNetParams) -> Vec<&[f64]> {
        p.arrays()
    }

    fn arrays_mut(p: &mut ResDNetParams) -> Vec<&mut [f64]> {
        p.arrays_mut()
    }

    fn predict(&self, params: &ResDNetParams, clean: &ImageTensor, seed: u64) -> Result<ImageTensor> {
        let noisy = add_noise(clean, &NoiseSpec::iid(self.val_sigma, seed))?;
        denoise(&noisy, self.val_sigma, params, Precision::F64)
    }

    fn checkpoint(p: &ResDNetParams, path: &std::path::Path) -> Result<()> {
        save_denoiser(p, path)
    }
}

/// Pretrains the denoiser on i.i.d. Gaussian noise with levels drawn from
/// `cfg.sigma_range`, minimising MSE. Validation is at `cfg.val_sigma`.
/// The dataset is split 80/20 internally.
pub fn pretrain_denoiser(data: &Dataset, init: ResDNetParams, cfg: &TrainConfig) -> Result<Trained<ResDNetParams>> {
    if cfg.phase != Phase::Pretrain {
        return arg_err("pretrain_denoiser needs phase = pretrain");
    }
    if data.is_empty() {
        return arg_err("training dataset is empty");
    }
    cfg.validate()?;
    init.check_shape()?;
    let (train, val) = data.split();
    let obj = PretrainObjective {
        sigma_range: cfg.sigma_range,
        val_sigma: cfg.val_sigma,
    };
    optimise(&obj, init, &train, &val, cfg)
}

struct JointObjective {
    pattern: CfaPattern,
    noise_sigma: f64,
}

impl JointObjective {
    fn observe(&self, clean: &ImageTensor, seed: u64) -> Result<crate::cfa::MosaicObservation> {
        noisy_observation(clean, &self.pattern, &NoiseSpec::iid(self.noise_sigma, seed))
    }
}

impl Objective for JointObjective {
    type Params = CascadeParams;
    type Grads = crate::cascade::CascadeGrads;

    fn item(&self, params: &CascadeParams, clean: &ImageTensor, seed: u64) -> Result<(f64, Self::Grads)> {
        let y = self.observe(clean, seed)?;
        let (out, traj) = demosaick_forward(&y, params)?;
        let (value, grad) = loss(&out, clean, LossKind::L1)?;
        Ok((value, demosaick_backward(&grad, &traj, params)?))
    }

    fn grad_arrays(g: &Self::Grads) -> Vec<&[f64]> {
        g.arrays()
    }

    fn arrays(p: &CascadeParams) -> Vec<&[f64]> {
        p.arrays()
    }

    fn arrays_mut(p: &mut CascadeParams) -> Vec<&mut [f64]> {
        p.arrays_mut()
    }

    fn after_step(p: &mut CascadeParams) {
        for s in &mut p.sigmas {
            *s = s.max(SIGMA_FLOOR);
        }
    }

    fn predict(&self, params: &CascadeParams, clean: &ImageTensor, seed: u64) -> Result<ImageTensor> {
        demosaick(&self.observe(clean, seed)?, params, Precision::F64)
    }

    fn checkpoint(p: &CascadeParams, path: &std::path::Path) -> Result<()> {
        save_model(p, path)
    }
}

/// Trains the whole cascade end to end with an L1 loss, starting from the
/// default schedule around `denoiser_init`. Observations are mosaicked with
/// `cfg.pattern` plus i.i.d. noise of level `cfg.noise_sigma`.
pub fn train_joint(data: &Dataset, denoiser_init: ResDNetParams, cfg: &TrainConfig) -> Result<Trained<CascadeParams>> {
    if cfg.phase != Phase::Joint {
        return arg_err("train_joint needs phase = joint");
    }
    if data.is_empty() {
        return arg_err("training dataset is empty");
    }
    cfg.validate()?;
    let params = CascadeParams::with_schedule(denoiser_init, cfg.steps, cfg.sigma_max, cfg.sigma_min)?;
    let (train, val) = data.split();
    let obj = JointObjective {
        pattern: CfaPattern::new(cfg.pattern),
        noise_sigma: cfg.noise_sigma,
    };
    optimise(&obj, params, &train, &val, cfg)
}
