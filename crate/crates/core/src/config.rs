//! Plain-text configuration: one `key = value` per line, `#` starts a comment.

use std::path::Path;

use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// Parses configuration text into `(key, value)` pairs in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Argument(format!(
                "config line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Argument(format!("config line {}: empty key", lineno + 1)));
        }
        out.push((key.to_ascii_lowercase(), value.to_string()));
    }
    Ok(out)
}

/// Applies every setting in `text` on top of `base`.
pub fn apply_config(mut base: TrainConfig, text: &str) -> Result<TrainConfig> {
    for (k, v) in parse_config(text)? {
        base.set(&k, &v)?;
    }
    Ok(base)
}

pub fn load_config(base: TrainConfig, path: impl AsRef<Path>) -> Result<TrainConfig> {
    apply_config(base, &std::fs::read_to_string(path)?)
}
