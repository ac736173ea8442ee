//! Binary model format.
//!
//! ```text
//! "RDNC"                      magic
//! u32 version                 currently 1
//! u32 depth, u32 steps, u32 features, u32 array_count
//! array_count × {
//!     u32 name_len, name bytes (UTF-8),
//!     u32 rank, rank × u32 dims,
//!     prod(dims) × f32 payload
//! }
//! ```
//!
//! All integers and floats are little-endian. `steps = 0` marks a bare
//! denoiser without a cascade schedule.

use std::fs;
use std::path::Path;

use crate::cascade::CascadeParams;
use crate::error::{Error, Result};
use crate::resdnet::ResDNetParams;

pub const MAGIC: &[u8; 4] = b"RDNC";
pub const VERSION: u32 = 1;

/// Decoded contents of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub denoiser: ResDNetParams,
    /// `(w, σ)` when the file holds a full cascade.
    pub schedule: Option<(Vec<f64>, Vec<f64>)>,
}

impl ModelFile {
    pub fn into_cascade(self) -> Result<CascadeParams> {
        match self.schedule {
            Some((w, sigmas)) => CascadeParams::new(self.denoiser, w, sigmas),
            None => Err(Error::Format {
                offset: 0,
                reason: "model holds a denoiser only, no cascade schedule".into(),
            }),
        }
    }
}

fn encode(
    depth: usize,
    steps: usize,
    features: usize,
    arrays: &[(String, Vec<usize>, Vec<f64>)],
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [VERSION, depth as u32, steps as u32, features as u32, arrays.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (name, dims, values) in arrays {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn encode_cascade(params: &CascadeParams) -> Vec<u8> {
    let d = &params.denoiser;
    encode(d.depth, params.steps(), d.features, &params.named_arrays())
}

pub fn encode_denoiser(params: &ResDNetParams) -> Vec<u8> {
    encode(params.depth, 0, params.features, &params.named_arrays())
}

pub fn save_model(params: &CascadeParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_cascade(params))?;
    Ok(())
}

pub fn save_denoiser(params: &ResDNetParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_denoiser(params))?;
    Ok(())
}

/// Loads a full cascade; fails on denoiser-only files.
pub fn load_model(path: impl AsRef<Path>) -> Result<CascadeParams> {
    decode(&fs::read(path)?)?.into_cascade()
}

/// Loads the denoiser part of any model file.
pub fn load_denoiser(path: impl AsRef<Path>) -> Result<ResDNetParams> {
    Ok(decode(&fs::read(path)?)?.denoiser)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: self.pos as u64,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!(
                "truncated: need {n} bytes, {} left",
                self.bytes.len() - self.pos
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        r.pos = 0;
        return r.fail("bad magic, expected RDNC");
    }
    let version = r.u32()?;
    if version != VERSION {
        r.pos -= 4;
        return r.fail(format!("unsupported format version {version}"));
    }
    let depth = r.u32()? as usize;
    let steps = r.u32()? as usize;
    let features = r.u32()? as usize;
    let count = r.u32()? as usize;
    if depth == 0 || features == 0 || depth > 1024 || features > 4096 {
        return r.fail(format!("implausible network shape depth={depth} features={features}"));
    }
    // reject before allocating anything sized by the header
    let (d, f) = (depth as u64, features as u64);
    let scalars = f * 77 + 2 * d * (f * f * 9 + 3 * f) + f * 76 + 3 + 1 + 2 * steps as u64;
    if 4 * scalars > (bytes.len() - r.pos) as u64 {
        return r.fail(format!(
            "truncated: header promises {scalars} parameters, only {} bytes follow",
            bytes.len() - r.pos
        ));
    }
    let mut denoiser = ResDNetParams::init(depth, features, 0)?.zeros_like();
    let mut expected = denoiser.named_arrays();
    if steps > 0 {
        expected.push(("cascade.w".into(), vec![steps], vec![]));
        expected.push(("cascade.sigma".into(), vec![steps], vec![]));
    }
    if count != expected.len() {
        return r.fail(format!(
            "array count {count} does not match {} expected for this shape",
            expected.len()
        ));
    }
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (name, dims, _) in &expected {
        let start = r.pos;
        let len = r.u32()? as usize;
        let got = r.take(len)?.to_vec();
        if got != name.as_bytes() {
            r.pos = start;
            return r.fail(format!(
                "expected array '{name}', found '{}'",
                String::from_utf8_lossy(&got)
            ));
        }
        let rank = r.u32()? as usize;
        if rank > 8 {
            return r.fail(format!("rank {rank} too large"));
        }
        let got_dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if &got_dims != dims {
            return r.fail(format!("array '{name}' has dims {got_dims:?}, expected {dims:?}"));
        }
        let n: usize = dims.iter().product();
        let payload = r.take(4 * n)?;
        values.push(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect(),
        );
    }
    if r.pos != bytes.len() {
        return r.fail(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let schedule = if steps > 0 {
        let sigmas = values.pop().expect("sigma array");
        let w = values.pop().expect("w array");
        Some((w, sigmas))
    } else {
        None
    };
    for (dst, src) in denoiser.arrays_mut().into_iter().zip(values) {
        dst.copy_from_slice(&src);
    }
    Ok(ModelFile { denoiser, schedule })
}
