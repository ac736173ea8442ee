//! Reading and writing images.
//!
//! Netpbm (PGM/PPM, 8- or 16-bit) and PNG go through the `image` crate;
//! intensities are mapped onto `[0, 255]` whatever the stored bit depth.
//! Files ending in `.rflt` are raw float dumps:
//!
//! ```text
//! "RFLT", u32 height, u32 width, u32 channels, h·w·c × f32   (little-endian)
//! ```

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::cfa::{CfaPattern, MosaicObservation};
use crate::error::{shape_err, Error, Result};
use crate::tensor::ImageTensor;

pub const RAW_MAGIC: &[u8; 4] = b"RFLT";
pub const RAW_EXTENSION: &str = "rflt";

fn is_raw(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some(RAW_EXTENSION)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    if is_raw(path) {
        return decode_raw(&fs::read(path)?);
    }
    let img = image::open(path)?;
    Ok(from_dynamic(img))
}

fn from_dynamic(img: DynamicImage) -> ImageTensor {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let gray = img.color().channel_count() < 3;
    match (gray, sixteen) {
        (true, false) => {
            let buf = img.into_luma8();
            ImageTensor::from_vec(h, w, 1, buf.into_raw().into_iter().map(f64::from).collect())
        }
        (true, true) => {
            let buf = img.into_luma16();
            ImageTensor::from_vec(h, w, 1, scale16(buf.into_raw()))
        }
        (false, false) => {
            let buf = img.into_rgb8();
            ImageTensor::from_vec(h, w, 3, buf.into_raw().into_iter().map(f64::from).collect())
        }
        (false, true) => {
            let buf = img.into_rgb16();
            ImageTensor::from_vec(h, w, 3, scale16(buf.into_raw()))
        }
    }
    .expect("decoded buffer matches its dimensions")
}

fn scale16(v: Vec<u16>) -> Vec<f64> {
    v.into_iter().map(|x| f64::from(x) * 255.0 / 65535.0).collect()
}

/// Writes `.rflt` exactly (at f32), anything else as 8-bit after rounding
/// and clipping to `[0, 255]`.
pub fn write_image(path: impl AsRef<Path>, image: &ImageTensor) -> Result<()> {
    let path = path.as_ref();
    if is_raw(path) {
        fs::write(path, encode_raw(image))?;
        return Ok(());
    }
    let (h, w, c) = image.shape();
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    let dynamic = match c {
        1 => DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(w as u32, h as u32, bytes).expect("sized buffer"),
        ),
        3 => DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(w as u32, h as u32, bytes).expect("sized buffer"),
        ),
        _ => return shape_err(format!("cannot store {c}-channel image as 8-bit")),
    };
    let format = ImageFormat::from_path(path).unwrap_or(ImageFormat::Pnm);
    if format == ImageFormat::Pnm {
        // `image` picks the netpbm subtype from the colour type when encoding
        dynamic.save_with_format(path, ImageFormat::Pnm)?;
    } else {
        dynamic.save_with_format(path, format)?;
    }
    Ok(())
}

pub fn encode_raw(image: &ImageTensor) -> Vec<u8> {
    let (h, w, c) = image.shape();
    let mut out = Vec::with_capacity(16 + 4 * image.len());
    out.extend_from_slice(RAW_MAGIC);
    for v in [h, w, c] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &v in image.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<ImageTensor> {
    let fail = |offset: usize, reason: &str| Error::Format {
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < 16 {
        return Err(fail(bytes.len(), "truncated raw header"));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(fail(0, "bad magic, expected RFLT"));
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| fail(4, "dimensions overflow"))?;
    if bytes.len() != 16 + 4 * n {
        return Err(fail(16, "payload length does not match header dimensions"));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    ImageTensor::from_vec(h, w, c, data)
}

/// Interprets an image as raw sensor data: a single plane is spread into
/// the channel its pattern samples; a 3-channel image is masked.
pub fn observation_from_image(
    image: &ImageTensor,
    pattern: &CfaPattern,
    sigma: f64,
) -> Result<MosaicObservation> {
    let data = match image.channels() {
        3 => image.clone(),
        1 => {
            let (h, w, _) = image.shape();
            ImageTensor::from_fn(h, w, 3, |r, c, ch| {
                if pattern.samples(r, c, ch) {
                    image.at(r, c, 0)
                } else {
                    0.0
                }
            })
        }
        n => return shape_err(format!("raw data must have 1 or 3 channels, got {n}")),
    };
    MosaicObservation::new(data, pattern.clone(), sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let img = ImageTensor::from_fn(3, 4, 3, |r, c, ch| r as f64 * 0.5 - c as f64 + ch as f64 * 100.25);
        assert_eq!(decode_raw(&encode_raw(&img)).unwrap(), img);
        let mut bad = encode_raw(&img);
        bad.pop();
        assert!(decode_raw(&bad).is_err());
    }

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageTensor::from_fn(5, 6, 3, |r, c, ch| ((r * 40 + c * 7 + ch * 60) % 256) as f64);
        let path = dir.path().join("a.ppm");
        write_image(&path, &img).unwrap();
        assert_eq!(read_image(&path).unwrap(), img);
        let gray = ImageTensor::from_fn(4, 4, 1, |r, c, _| (r * 16 + c) as f64);
        let gpath = dir.path().join("g.pgm");
        write_image(&gpath, &gray).unwrap();
        assert_eq!(read_image(&gpath).unwrap(), gray);
    }

    #[test]
    fn sixteen_bit_is_rescaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.pgm");
        // P5 with maxval 65535: one pixel at full scale, one at half
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x80, 0x00]);
        fs::write(&path, bytes).unwrap();
        let img = read_image(&path).unwrap();
        assert_eq!(img.shape(), (1, 2, 1));
        assert!((img.data()[0] - 255.0).abs() < 1e-12);
        assert!((img.data()[1] - 32768.0 * 255.0 / 65535.0).abs() < 1e-9);
    }

    #[test]
    fn single_plane_observation() {
        let plane = ImageTensor::filled(4, 4, 1, 9.0);
        let p = CfaPattern::new(crate::cfa::PatternKind::BayerRggb);
        let y = observation_from_image(&plane, &p, 0.0).unwrap();
        assert_eq!(y.data().at(0, 0, 0), 9.0);
        assert_eq!(y.data().at(0, 0, 1), 0.0);
        assert_eq!(y.data().at(0, 1, 1), 9.0);
    }
}
