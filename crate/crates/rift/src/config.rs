//! Pipeline configuration as JSON.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::deconv::LrOptions;
use crate::entropy::EntropyWindow;
use crate::error::{Error, Result};
use crate::kernels::ConstellationConfig;
use crate::signals::Preset;
use crate::tracking::TrackerConfig;

/// Where the input signal comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSource {
    Preset(Preset),
    Wav(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub num_freq: usize,
    pub num_time: usize,
    /// Band in Hz; defaults to the preset's band, or DC to Nyquist for WAV input.
    pub f_min_hz: Option<f64>,
    pub f_max_hz: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { num_freq: 256, num_time: 512, f_min_hz: None, f_max_hz: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    /// Sharpness of the entropy weighting; positive favours low entropy.
    pub alpha: f64,
    pub window: EntropyWindow,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig { alpha: 15.0, window: EntropyWindow::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeconvConfig {
    pub iterations: usize,
    pub lambda: f64,
    pub row_blocks: usize,
    pub col_blocks: usize,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        let lr = LrOptions::default();
        DeconvConfig { iterations: lr.iterations, lambda: lr.lambda, row_blocks: 4, col_blocks: 4 }
    }
}

impl DeconvConfig {
    pub fn options(&self) -> LrOptions {
        LrOptions { iterations: self.iterations, lambda: self.lambda }
    }
}

/// Everything one run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub signal: SignalSource,
    /// Additive white noise level in dB; `None` leaves the signal clean.
    pub snr_db: Option<f64>,
    pub grid: GridConfig,
    pub constellation: ConstellationConfig,
    pub entropy: EntropyConfig,
    pub deconv: DeconvConfig,
    pub tracker: TrackerConfig,
    /// Compute metrics against the reference (presets only).
    pub metrics: bool,
    /// Blur of the reference tolerance tube, pixels.
    pub tube_sigma: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            signal: SignalSource::Preset(Preset::X1),
            snr_db: None,
            grid: GridConfig::default(),
            constellation: ConstellationConfig::default(),
            entropy: EntropyConfig::default(),
            deconv: DeconvConfig::default(),
            tracker: TrackerConfig::default(),
            metrics: true,
            tube_sigma: 1.5,
            output_dir: PathBuf::from("rift-out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn for_preset(p: Preset) -> Self {
        PipelineConfig { signal: SignalSource::Preset(p), ..Default::default() }
    }

    /// Parses JSON, reporting the line and column of the first problem.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| {
            Error::InvalidConfig(e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.grid.num_freq < 2 || self.grid.num_time < 2 {
            return bad("grid needs at least 2x2 cells".into());
        }
        if let (Some(lo), Some(hi)) = (self.grid.f_min_hz, self.grid.f_max_hz) {
            if !(hi > lo && lo >= 0.0) {
                return bad(format!("band [{lo}, {hi}] Hz is empty or negative"));
            }
        }
        if self.constellation.sigma_count == 0 || self.constellation.sigma_count.is_multiple_of(2) {
            return bad(format!("sigma_count must be odd, got {}", self.constellation.sigma_count));
        }
        if !(self.constellation.sigma_spread > 0.0) {
            return bad("sigma_spread must be positive".into());
        }
        if !self.entropy.alpha.is_finite() {
            return bad("alpha must be finite".into());
        }
        if !(self.deconv.lambda >= 0.0 && self.deconv.lambda < 0.25) {
            return bad(format!("lambda {} must lie in [0, 0.25)", self.deconv.lambda));
        }
        if self.deconv.row_blocks == 0 || self.deconv.col_blocks == 0 {
            return bad("block counts must be at least 1".into());
        }
        if self.deconv.row_blocks > self.grid.num_freq || self.deconv.col_blocks > self.grid.num_time {
            return bad("more blocks than grid cells".into());
        }
        if !(self.tube_sigma >= 0.0) {
            return bad("tube_sigma must be non-negative".into());
        }
        if matches!(self.snr_db, Some(s) if !s.is_finite()) {
            return bad("snr_db must be finite; omit it for a clean signal".into());
        }
        self.tracker.validate().map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}
