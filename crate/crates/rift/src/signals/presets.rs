use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{add_awgn, add_awgn_complex, synthesize, synthesize_complex, ComponentSpec};
use crate::error::{Error, Result};
use crate::fourier::analytic_signal;
use crate::grid::{AnalyticSignal, RealSignal, TfGrid};

/// Built-in demonstration signals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Parallel pair of sinusoidal FM tones, 20 Hz apart.
    X1,
    /// Two modulated tones riding a ramp plus two linear chirps.
    X4,
    /// A single sinusoidal FM tone.
    X5,
    /// A slow FM tone crossing a linear chirp at t = 2 s.
    X6,
    /// Complex pair of parallel linear chirps.
    Z3,
}

/// A preset rendered either as a real waveform or directly as an analytic one.
#[derive(Clone, Debug, PartialEq)]
pub enum PresetSignal {
    Real(RealSignal),
    Complex(AnalyticSignal),
}

impl PresetSignal {
    pub fn analytic(&self) -> Result<AnalyticSignal> {
        match self {
            PresetSignal::Real(x) => analytic_signal(x),
            PresetSignal::Complex(z) => Ok(z.clone()),
        }
    }

    pub fn with_noise(&self, snr_db: f64, seed: u64) -> Result<PresetSignal> {
        Ok(match self {
            PresetSignal::Real(x) => PresetSignal::Real(add_awgn(x, snr_db, seed)?),
            PresetSignal::Complex(z) => PresetSignal::Complex(add_awgn_complex(z, snr_db, seed)?),
        })
    }
}

fn fm(center: f64, depth: f64, rate: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |t| center + depth * (2.0 * PI * rate * t).sin()
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::X1, Preset::X4, Preset::X5, Preset::X6, Preset::Z3];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::X1 => "x1",
            Preset::X4 => "x4",
            Preset::X5 => "x5",
            Preset::X6 => "x6",
            Preset::Z3 => "z3",
        }
    }

    pub fn components(&self) -> Vec<ComponentSpec> {
        match self {
            Preset::X1 => vec![
                ComponentSpec::unit(fm(100.0, 50.0, 1.0)),
                ComponentSpec::unit(fm(80.0, 50.0, 1.0)),
            ],
            Preset::X4 => vec![
                ComponentSpec::unit(|t| 110.0 + 30.0 * (2.0 * PI * t).sin() + 50.0 * t / 3.0 - 25.0),
                ComponentSpec::unit(|t| 90.0 + 30.0 * (2.0 * PI * t).sin() + 50.0 * t / 3.0 - 25.0),
                ComponentSpec::unit(|t| 150.0 + 50.0 * t / 3.0),
                ComponentSpec::unit(|t| 10.0 + 40.0 * t / 3.0),
            ],
            Preset::X5 => vec![ComponentSpec::unit(fm(100.0, 50.0, 1.0))],
            Preset::X6 => vec![
                ComponentSpec::unit(|t| 60.0 + 30.0 * (PI / 2.0 * t).sin()),
                ComponentSpec::unit(|t| 30.0 + 15.0 * t),
            ],
            Preset::Z3 => vec![
                ComponentSpec::unit(|t| 50.0 + 100.0 * t / 3.0),
                ComponentSpec::unit(|t| 60.0 + 100.0 * t / 3.0),
            ],
        }
    }

    /// Signal length in seconds.
    pub fn duration(&self) -> f64 {
        match self {
            Preset::X1 | Preset::X5 | Preset::Z3 => 2.0,
            Preset::X4 => 3.0,
            Preset::X6 => 4.0,
        }
    }

    pub fn sample_rate(&self) -> f64 {
        512.0
    }

    /// Default displayed band `(f_min, f_max)` in Hz.
    pub fn band_hz(&self) -> (f64, f64) {
        match self {
            Preset::X1 | Preset::X5 => (0.0, 200.0),
            Preset::X4 => (0.0, 250.0),
            Preset::X6 | Preset::Z3 => (0.0, 150.0),
        }
    }

    /// Grid of `num_freq x num_time` over the preset's band and duration.
    pub fn grid(&self, num_freq: usize, num_time: usize) -> Result<TfGrid> {
        let (lo, hi) = self.band_hz();
        TfGrid::from_hz(num_freq, num_time, lo, hi, self.duration(), self.sample_rate())
    }

    pub fn signal(&self) -> Result<PresetSignal> {
        let comps = self.components();
        Ok(match self {
            Preset::Z3 => PresetSignal::Complex(synthesize_complex(
                &comps,
                self.duration(),
                self.sample_rate(),
            )?),
            _ => PresetSignal::Real(synthesize(&comps, self.duration(), self.sample_rate())?),
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset '{s}' (x1, x4, x5, x6, z3)")))
    }
}
