//! On-disk formats: the binary field container and 16-bit PGM renders.
//!
//! A field file is a little-endian header (`RIFT`, version `u32`, rows `u32`,
//! columns `u32`, `f_min` Hz `f64`, `f_max` Hz `f64`, time step `f64`)
//! followed by `rows * cols` `f64` values, row-major, row 0 at `f_min`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TfGrid};

pub const MAGIC: &[u8; 4] = b"RIFT";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 3 + 8 * 3;

/// A field with its axes, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub delta_t: f64,
    pub values: Field,
}

impl FieldFile {
    pub fn new(grid: &TfGrid, values: Field) -> Self {
        FieldFile { f_min_hz: grid.f_min_hz(), f_max_hz: grid.f_max_hz(), delta_t: grid.delta_t, values }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.as_slice().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.values.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(self.values.cols() as u32).to_le_bytes());
        for v in [self.f_min_hz, self.f_max_hz, self.delta_t] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.values.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::UnsupportedFormat("not a field file (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(format!("field file version {version}")));
        }
        let (rows, cols) = (u32_at(8) as usize, u32_at(12) as usize);
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Parse("field dimensions overflow".into()))?;
        if bytes.len() != HEADER_LEN + 8 * n {
            return Err(Error::Parse(format!(
                "field file holds {} bytes, header implies {}",
                bytes.len(),
                HEADER_LEN + 8 * n
            )));
        }
        let data = (0..n).map(|k| f64_at(HEADER_LEN + 8 * k)).collect();
        Ok(FieldFile {
            f_min_hz: f64_at(16),
            f_max_hz: f64_at(24),
            delta_t: f64_at(32),
            values: Field::from_vec(rows, cols, data)?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Sidecar describing how a PGM maps back to field values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderInfo {
    pub image: String,
    pub rows: usize,
    pub cols: usize,
    /// Field value drawn as black.
    pub black: f64,
    /// Field value drawn as white (65535).
    pub white: f64,
    pub gamma: f64,
    /// Image rows run from the highest frequency at the top.
    pub top_is_high_frequency: bool,
}

/// Encodes `values` as a binary 16-bit PGM with `black` and `white` mapped to
/// the ends of the range and the given display gamma.
pub fn encode_pgm(values: &Field, black: f64, white: f64, gamma: f64) -> Vec<u8> {
    let (rows, cols) = values.shape();
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    let span = white - black;
    for i in (0..rows).rev() {
        for &v in values.row(i) {
            let t = if span > 0.0 { ((v - black) / span).clamp(0.0, 1.0) } else { 0.0 };
            let level = (t.powf(1.0 / gamma) * 65535.0).round() as u16;
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    out
}

/// Writes `stem.pgm` and `stem.json` into `dir`. Energy fields use
/// `[0, max]`; fields that may be negative use their full range.
pub fn write_render(dir: &Path, stem: &str, values: &Field, gamma: f64) -> Result<RenderInfo> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput("gamma must be positive".into()));
    }
    let lo = values.min();
    let black = if lo >= 0.0 { 0.0 } else { lo };
    let white = values.max();
    let image = format!("{stem}.pgm");
    fs::File::create(dir.join(&image))?.write_all(&encode_pgm(values, black, white, gamma))?;
    let info = RenderInfo {
        image,
        rows: values.rows(),
        cols: values.cols(),
        black,
        white,
        gamma,
        top_is_high_frequency: true,
    };
    let json = serde_json::to_string_pretty(&info).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(info)
}
