//! Image quality metrics and colour transfer curves.

use crate::error::Result;
use crate::tensor::ImageTensor;

/// Where the linear and power segments of the sRGB curve actually meet.
/// The nominal switch point 0.0031308 leaves a ~3e-8 step; switching here
/// keeps the curve continuous.
const SRGB_KNEE: f64 = 0.003_130_668_442_500_635;

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b, "mse")?;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
}

/// `10·log₁₀(peak²/MSE)` over every pixel and channel; `+∞` when identical.
pub fn psnr(a: &ImageTensor, b: &ImageTensor, peak: f64) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// PSNR with an 8-bit peak.
pub fn psnr_255(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    psnr(a, b, 255.0)
}

/// Standard sRGB transfer on a normalised value, clipped to `[0, 1]` first.
pub fn srgb_encode(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    if u <= SRGB_KNEE {
        12.92 * u
    } else {
        1.055 * u.powf(1.0 / 2.4) - 0.055
    }
}

/// Applies the sRGB transfer curve to an image on the `[0, 255]` scale.
/// No chromatic transform is applied.
pub fn linrgb_to_srgb(image: &ImageTensor) -> ImageTensor {
    image.map(|v| 255.0 * srgb_encode(v / 255.0))
}

/// Formats a PSNR for tables and CSV (`inf` for identical images).
pub fn format_psnr(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_cases() {
        let a = ImageTensor::filled(4, 4, 3, 100.0);
        assert_eq!(psnr_255(&a, &a).unwrap(), f64::INFINITY);
        let b = ImageTensor::filled(4, 4, 3, 101.0);
        assert!((psnr_255(&a, &b).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        let black = ImageTensor::zeros(2, 2, 3);
        let white = ImageTensor::filled(2, 2, 3, 255.0);
        assert!(psnr_255(&black, &white).unwrap().abs() < 1e-12);
        assert!(psnr_255(&a, &ImageTensor::zeros(4, 4, 1)).is_err());
    }

    #[test]
    fn srgb_points() {
        assert_eq!(srgb_encode(0.0), 0.0);
        assert!((srgb_encode(1.0) - 1.0).abs() < 1e-15);
        assert!((srgb_encode(0.003_130_8) - 0.040_449_907).abs() < 1e-8);
        assert!((srgb_encode(0.18) - 0.461_356_129_500_441_6).abs() < 1e-12);
        let below = srgb_encode(SRGB_KNEE);
        let above = srgb_encode(SRGB_KNEE * (1.0 + 1e-15));
        assert!((below - above).abs() < 1e-9);
        assert_eq!(srgb_encode(-1.0), 0.0);
        assert_eq!(format_psnr(f64::INFINITY), "inf");
    }
}
