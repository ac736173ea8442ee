//! Colour filter arrays, the binary sampling operator they induce, and the
//! bilinear baseline.

use std::fmt;
use std::str::FromStr;

use crate::error::{arg_err, shape_err, Error, Result};
use crate::tensor::{reflect_index, ImageTensor};

pub const RED: u8 = 0;
pub const GREEN: u8 = 1;
pub const BLUE: u8 = 2;

/// The supported colour filter layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    BayerRggb,
    BayerGrbg,
    BayerGbrg,
    BayerBggr,
    XTrans,
}

impl PatternKind {
    pub const ALL: [PatternKind; 5] = [
        PatternKind::BayerRggb,
        PatternKind::BayerGrbg,
        PatternKind::BayerGbrg,
        PatternKind::BayerBggr,
        PatternKind::XTrans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::BayerRggb => "bayer_rggb",
            PatternKind::BayerGrbg => "bayer_grbg",
            PatternKind::BayerGbrg => "bayer_gbrg",
            PatternKind::BayerBggr => "bayer_bggr",
            PatternKind::XTrans => "xtrans",
        }
    }

    pub fn is_bayer(self) -> bool {
        !matches!(self, PatternKind::XTrans)
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PatternKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown CFA pattern '{s}' (expected bayer_rggb|bayer_grbg|bayer_gbrg|bayer_bggr|xtrans)"
                ))
            })
    }
}

// Fujifilm X-Trans 6x6 layout, 20 G / 8 R / 8 B.
const XTRANS_CELL: [[u8; 6]; 6] = [
    [GREEN, GREEN, RED, GREEN, GREEN, BLUE],
    [GREEN, GREEN, BLUE, GREEN, GREEN, RED],
    [BLUE, RED, GREEN, RED, BLUE, GREEN],
    [GREEN, GREEN, BLUE, GREEN, GREEN, RED],
    [GREEN, GREEN, RED, GREEN, GREEN, BLUE],
    [RED, BLUE, GREEN, BLUE, RED, GREEN],
];

/// A periodic sampling grid: pixel `(r, c)` records channel
/// `cell[r mod period_h][c mod period_w]` and nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfaPattern {
    kind: PatternKind,
    period_h: usize,
    period_w: usize,
    cell: Vec<u8>,
}

impl CfaPattern {
    pub fn new(kind: PatternKind) -> Self {
        let bayer = |cell: [u8; 4]| CfaPattern {
            kind,
            period_h: 2,
            period_w: 2,
            cell: cell.to_vec(),
        };
        match kind {
            PatternKind::BayerRggb => bayer([RED, GREEN, GREEN, BLUE]),
            PatternKind::BayerGrbg => bayer([GREEN, RED, BLUE, GREEN]),
            PatternKind::BayerGbrg => bayer([GREEN, BLUE, RED, GREEN]),
            PatternKind::BayerBggr => bayer([BLUE, GREEN, GREEN, RED]),
            PatternKind::XTrans => CfaPattern {
                kind,
                period_h: 6,
                period_w: 6,
                cell: XTRANS_CELL.iter().flatten().copied().collect(),
            },
        }
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn period(&self) -> (usize, usize) {
        (self.period_h, self.period_w)
    }

    /// Row-major `period_h × period_w` grid of channel indices.
    pub fn cell(&self) -> &[u8] {
        &self.cell
    }

    /// The channel sampled at pixel `(row, col)`.
    #[inline]
    pub fn channel_at(&self, row: usize, col: usize) -> u8 {
        self.cell[(row % self.period_h) * self.period_w + col % self.period_w]
    }

    #[inline]
    pub fn samples(&self, row: usize, col: usize, channel: usize) -> bool {
        self.channel_at(row, col) as usize == channel
    }

    /// How many cells of one period sample R, G and B.
    pub fn channel_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for &c in &self.cell {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Diagonal of the sampling operator as a 0/1 tensor.
    pub fn mask(&self, height: usize, width: usize) -> ImageTensor {
        ImageTensor::from_fn(height, width, 3, |y, x, c| {
            if self.samples(y, x, c) {
                1.0
            } else {
                0.0
            }
        })
    }
}

impl FromStr for CfaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(CfaPattern::new(s.parse()?))
    }
}

/// Builds the named pattern.
pub fn make_pattern(kind: &str) -> Result<CfaPattern> {
    kind.parse()
}

/// Raw sensor data in 3-channel zero-filled form: entries the pattern does
/// not sample are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MosaicObservation {
    data: ImageTensor,
    pattern: CfaPattern,
    sigma: f64,
}

impl MosaicObservation {
    /// Wraps `data`, zeroing every entry the pattern does not sample.
    pub fn new(data: ImageTensor, pattern: CfaPattern, sigma: f64) -> Result<Self> {
        if data.channels() != 3 {
            return shape_err(format!(
                "observations have 3 channels, got {}",
                data.channels()
            ));
        }
        if !(sigma >= 0.0) {
            return arg_err(format!("noise level must be non-negative, got {sigma}"));
        }
        Ok(Self {
            data: apply_mask(&data, &pattern),
            pattern,
            sigma,
        })
    }

    pub fn data(&self) -> &ImageTensor {
        &self.data
    }

    pub fn pattern(&self) -> &CfaPattern {
        &self.pattern
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.shape()
    }
}

fn apply_mask(image: &ImageTensor, pattern: &CfaPattern) -> ImageTensor {
    let (h, w, c) = image.shape();
    ImageTensor::from_fn(h, w, c, |y, x, ch| {
        if pattern.samples(y, x, ch) {
            image.at(y, x, ch)
        } else {
            0.0
        }
    })
}

/// `M·image`: keeps the sampled entries and zeroes the rest.
pub fn mosaic(image: &ImageTensor, pattern: &CfaPattern) -> Result<MosaicObservation> {
    MosaicObservation::new(image.clone(), pattern.clone(), 0.0)
}

/// `(I − M)u + y`: observed values where sampled, `u` elsewhere.
pub fn data_consistency(u: &ImageTensor, y: &MosaicObservation) -> Result<ImageTensor> {
    u.check_same_shape(&y.data, "data consistency")?;
    let pattern = &y.pattern;
    let (h, w, c) = u.shape();
    Ok(ImageTensor::from_fn(h, w, c, |r, col, ch| {
        if pattern.samples(r, col, ch) {
            y.data.at(r, col, ch)
        } else {
            u.at(r, col, ch)
        }
    }))
}

/// `(I − M)g`: the adjoint of [`data_consistency`] with respect to `u`.
pub(crate) fn unsampled_part(g: &ImageTensor, pattern: &CfaPattern) -> ImageTensor {
    let (h, w, c) = g.shape();
    ImageTensor::from_fn(h, w, c, |r, col, ch| {
        if pattern.samples(r, col, ch) {
            0.0
        } else {
            g.at(r, col, ch)
        }
    })
}

const GREEN_KERNEL: [f64; 9] = [0.0, 0.25, 0.0, 0.25, 1.0, 0.25, 0.0, 0.25, 0.0];
const RED_BLUE_KERNEL: [f64; 9] = [0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25];

/// Classic bilinear interpolation for Bayer layouts; mask-normalised box
/// averaging for everything else.
pub fn bilinear_demosaick(y: &MosaicObservation) -> ImageTensor {
    if y.pattern.kind().is_bayer() {
        bilinear_bayer(&y.data)
    } else {
        normalized_box(y)
    }
}

fn bilinear_bayer(data: &ImageTensor) -> ImageTensor {
    let (h, w, _) = data.shape();
    ImageTensor::from_fn(h, w, 3, |r, c, ch| {
        let kernel = if ch == GREEN as usize {
            &GREEN_KERNEL
        } else {
            &RED_BLUE_KERNEL
        };
        let mut acc = 0.0;
        for dy in 0..3 {
            for dx in 0..3 {
                let k = kernel[dy * 3 + dx];
                if k == 0.0 {
                    continue;
                }
                let sy = reflect_index(r as isize + dy as isize - 1, h);
                let sx = reflect_index(c as isize + dx as isize - 1, w);
                acc += k * data.at(sy, sx, ch);
            }
        }
        acc
    })
}

fn normalized_box(y: &MosaicObservation) -> ImageTensor {
    let (h, w, _) = y.data.shape();
    let pattern = &y.pattern;
    let max_radius = h.max(w);
    ImageTensor::from_fn(h, w, 3, |r, c, ch| {
        if pattern.samples(r, c, ch) {
            return y.data.at(r, c, ch);
        }
        for radius in 1..=max_radius {
            let (mut sum, mut count) = (0.0, 0usize);
            for sy in r.saturating_sub(radius)..(r + radius + 1).min(h) {
                for sx in c.saturating_sub(radius)..(c + radius + 1).min(w) {
                    if pattern.samples(sy, sx, ch) {
                        sum += y.data.at(sy, sx, ch);
                        count += 1;
                    }
                }
            }
            if count > 0 {
                return sum / count as f64;
            }
        }
        0.0
    })
}
