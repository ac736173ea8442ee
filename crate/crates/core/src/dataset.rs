//! Image collections for training and evaluation.

use std::f64::consts::TAU;
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Result};
use crate::imageio::read_image;
use crate::tensor::ImageTensor;

/// File extensions picked up by [`load_dir`].
pub const IMAGE_EXTENSIONS: [&str; 5] = ["ppm", "pgm", "pnm", "png", "rflt"];

/// Named RGB images kept in filename order.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    entries: Vec<(String, ImageTensor)>,
}

impl Dataset {
    pub fn new(mut entries: Vec<(String, ImageTensor)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Dataset { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageTensor> {
        self.entries.iter().map(|(_, i)| i)
    }

    pub fn entries(&self) -> &[(String, ImageTensor)] {
        &self.entries
    }

    /// Fixed 80/20 split: every fifth image in filename order is held out.
    /// Independent of any seed.
    pub fn split(&self) -> (Dataset, Dataset) {
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for (i, e) in self.entries.iter().enumerate() {
            if i % 5 == 4 {
                val.push(e.clone());
            } else {
                train.push(e.clone());
            }
        }
        (Dataset { entries: train }, Dataset { entries: val })
    }
}

/// Reads every image file in `dir` (not recursive). Non-RGB images are
/// skipped with a warning.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !path.is_file() || !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let img = read_image(&path)?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if img.channels() != 3 {
            warn!("skipping {name}: {} channel(s), need RGB", img.channels());
            continue;
        }
        entries.push((name, img));
    }
    if entries.is_empty() {
        return arg_err(format!("no RGB images found in {}", dir.display()));
    }
    Ok(Dataset::new(entries))
}

fn muted_colour(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let gray = rng.random_range(0.25..0.8);
    let sat = rng.random_range(0.15..0.6);
    std::array::from_fn(|_| gray * (1.0 - sat) + rng.random_range(0.1..0.95) * sat)
}

struct Grating {
    amp: f64,
    freq: f64,
    cos: f64,
    sin: f64,
    phase: f64,
}

enum Shape {
    Disk { cy: f64, cx: f64, r2: f64 },
    Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Disk { cy, cx, r2 } => (y - cy).powi(2) + (x - cx).powi(2) <= r2,
            Shape::Rect { y0, x0, y1, x1 } => y >= y0 && y <= y1 && x >= x0 && x <= x1,
        }
    }
}

/// One synthetic scene: a smooth two-colour backdrop, flat-coloured disks
/// and rectangles with hard edges, all modulated by a shared luminance
/// texture of oriented gratings. Channels are strongly correlated, as in
/// natural images. Values lie in `[5, 250]`.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = muted_colour(&mut rng);
    let c1 = muted_colour(&mut rng);
    let theta = rng.random_range(0.0..TAU);
    let (gy, gx) = (theta.sin(), theta.cos());
    let span = (height + width) as f64;

    let gratings: Vec<Grating> = (0..rng.random_range(2..5))
        .map(|_| {
            let t = rng.random_range(0.0..TAU);
            Grating {
                amp: rng.random_range(0.04..0.2),
                freq: rng.random_range(0.01..0.3),
                cos: t.cos(),
                sin: t.sin(),
                phase: rng.random_range(0.0..TAU),
            }
        })
        .collect();

    let (h, w) = (height as f64, width as f64);
    let shapes: Vec<(Shape, [f64; 3])> = (0..rng.random_range(3..9))
        .map(|_| {
            let shape = if rng.random_bool(0.5) {
                let r = rng.random_range(0.05..0.3) * h.min(w);
                Shape::Disk {
                    cy: rng.random_range(0.0..h),
                    cx: rng.random_range(0.0..w),
                    r2: r * r,
                }
            } else {
                let (y0, x0) = (rng.random_range(0.0..h), rng.random_range(0.0..w));
                Shape::Rect {
                    y0,
                    x0,
                    y1: y0 + rng.random_range(0.1..0.5) * h,
                    x1: x0 + rng.random_range(0.1..0.5) * w,
                }
            };
            (shape, muted_colour(&mut rng))
        })
        .collect();

    let mut colour = vec![[0.0; 3]; height * width];
    let mut lum = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64, c as f64);
            let t = 0.5 + (gy * y + gx * x) / span;
            let mut col: [f64; 3] = std::array::from_fn(|k| c0[k] * (1.0 - t) + c1[k] * t);
            // later shapes are drawn on top
            for (shape, sc) in &shapes {
                if shape.contains(y, x) {
                    col = *sc;
                }
            }
            colour[r * width + c] = col;
            lum[r * width + c] = 1.0
                + gratings
                    .iter()
                    .map(|g| g.amp * (TAU * g.freq * (g.cos * x + g.sin * y) + g.phase).sin())
                    .sum::<f64>();
        }
    }
    ImageTensor::from_fn(height, width, 3, |r, c, ch| {
        let i = r * width + c;
        (255.0 * colour[i][ch] * lum[i]).clamp(5.0, 250.0)
    })
}

/// `count` synthetic scenes named `synth_0000`, `synth_0001`, ….
pub fn synthetic_dataset(count: usize, height: usize, width: usize, seed: u64) -> Dataset {
    let entries = (0..count)
        .map(|i| {
            let s = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            (format!("synth_{i:04}"), synthetic_image(height, width, s))
        })
        .collect();
    Dataset::new(entries)
}
