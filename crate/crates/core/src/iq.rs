//! Raw IQ files: interleaved little-endian `f32` pairs (re, im, re, im, ...)
//! with no header, plus a `<file>.meta` sidecar of `key=value` lines carrying
//! `sample_rate_hz` and `description`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// Path of the metadata sidecar for an IQ file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Writes `signal` as interleaved `f32` LE and its sidecar.
pub fn write_iq(path: &Path, signal: &ComplexSignal, description: &str) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in signal.samples() {
        w.write_all(&(s.re as f32).to_le_bytes())
            .and_then(|_| w.write_all(&(s.im as f32).to_le_bytes()))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let meta = sidecar_path(path);
    let description = description.replace(['\n', '\r'], " ");
    let text = format!(
        "sample_rate_hz={}\ndescription={}\n",
        signal.sample_rate(),
        description
    );
    fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

/// Sidecar contents.
#[derive(Debug, Clone, PartialEq)]
pub struct IqMetadata {
    pub sample_rate_hz: f64,
    pub description: String,
}

pub fn read_metadata(path: &Path) -> Result<IqMetadata> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let mut sample_rate = None;
    let mut description = String::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: i + 1,
            message: format!("{}: expected key=value", meta.display()),
        })?;
        match key.trim() {
            "sample_rate_hz" => {
                let v: f64 = value.trim().parse().map_err(|_| Error::Config {
                    line: i + 1,
                    message: format!("{}: bad sample_rate_hz '{value}'", meta.display()),
                })?;
                sample_rate = Some(v);
            }
            "description" => description = value.trim().to_string(),
            // Other tools may add their own keys.
            _ => {}
        }
    }
    let sample_rate_hz = sample_rate.ok_or_else(|| {
        Error::InvalidParameter(format!("{}: missing sample_rate_hz", meta.display()))
    })?;
    Ok(IqMetadata {
        sample_rate_hz,
        description,
    })
}

/// Reads an IQ file and its sidecar.
pub fn read_iq(path: &Path) -> Result<ComplexSignal> {
    let meta = read_metadata(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidParameter(format!(
            "{}: length {} is not a whole number of complex f32 samples",
            path.display(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    ComplexSignal::new(samples, 1.0 / meta.sample_rate_hz)
}
