//! Capture files: raw little-endian interleaved `i16` I/Q pairs with no
//! header, plus an optional `<file>.meta` sidecar of `key = value` lines
//! (`sample_rate_hz`, `band`, `mode`, `agc_db`).

use std::fs;
use std::path::{Path, PathBuf};

use super::{IqCapture, IqSample, RfError, DEFAULT_SAMPLE_RATE_HZ};

pub fn sidecar_path(capture: &Path) -> PathBuf {
    let mut name = capture.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn encode_samples(samples: &[IqSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 4);
    for s in samples {
        out.extend_from_slice(&s.i.to_le_bytes());
        out.extend_from_slice(&s.q.to_le_bytes());
    }
    out
}

pub fn decode_samples(bytes: &[u8]) -> Result<Vec<IqSample>, RfError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(RfError::OddLength(bytes.len()));
    }
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(index, c)| {
            let i = i16::from_le_bytes([c[0], c[1]]);
            let q = i16::from_le_bytes([c[2], c[3]]);
            if i == i16::MIN || q == i16::MIN {
                return Err(RfError::InvalidSample { index });
            }
            Ok(IqSample { i, q })
        })
        .collect()
}

pub fn render_sidecar(capture: &IqCapture) -> String {
    let mut out = format!("sample_rate_hz = {}\n", capture.sample_rate_hz);
    if let Some(band) = capture.band {
        out.push_str(&format!("band = {band}\n"));
    }
    if let Some(mode) = capture.mode {
        out.push_str(&format!("mode = {mode}\n"));
    }
    if let Some(agc) = capture.agc_db {
        out.push_str(&format!("agc_db = {agc}\n"));
    }
    out
}

/// Apply sidecar text to `capture`'s metadata fields.
pub fn parse_sidecar(text: &str, capture: &mut IqCapture, path: &str) -> Result<(), RfError> {
    let err = |msg: String| RfError::Sidecar {
        path: path.to_owned(),
        msg,
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |e: &dyn std::fmt::Display| err(format!("line {}: {key}: {e}", lineno + 1));
        match key {
            "sample_rate_hz" => {
                capture.sample_rate_hz = value.parse().map_err(|e| bad(&e))?;
            }
            "band" => capture.band = Some(value.parse().map_err(|e| bad(&e))?),
            "mode" => capture.mode = Some(value.parse().map_err(|e| bad(&e))?),
            "agc_db" => capture.agc_db = Some(value.parse().map_err(|e| bad(&e))?),
            other => return Err(err(format!("line {}: unknown key {other:?}", lineno + 1))),
        }
    }
    Ok(())
}

pub fn write_capture(path: &Path, capture: &IqCapture) -> Result<(), RfError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |source| RfError::Io { path: p, source }
    };
    fs::write(path, encode_samples(&capture.samples)).map_err(io(path))?;
    let meta = sidecar_path(path);
    fs::write(&meta, render_sidecar(capture)).map_err(io(&meta))?;
    Ok(())
}

/// Read a capture and, when present, its sidecar. Without a sidecar the
/// sample rate defaults to 20 MHz and band/mode stay unknown.
pub fn read_capture(path: &Path) -> Result<IqCapture, RfError> {
    let bytes = fs::read(path).map_err(|source| RfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.is_empty() {
        return Err(RfError::EmptyCapture);
    }
    let mut capture = IqCapture::new(decode_samples(&bytes)?);
    capture.sample_rate_hz = DEFAULT_SAMPLE_RATE_HZ;
    let meta = sidecar_path(path);
    if meta.exists() {
        let text = fs::read_to_string(&meta).map_err(|source| RfError::Io {
            path: meta.display().to_string(),
            source,
        })?;
        parse_sidecar(&text, &mut capture, &meta.display().to_string())?;
    }
    Ok(capture)
}
