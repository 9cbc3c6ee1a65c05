//! Test-signal synthesis, noise injection, WAV ingestion and the rasterized
//! reference ITFR.

mod itfr;
mod presets;
mod wav;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::grid::{AnalyticSignal, RealSignal};

pub use itfr::{column_weights, rasterize_itfr, trajectories, ReferenceItfr, Trajectory};
pub use presets::{Preset, PresetSignal};
pub use wav::load_wav;

/// A scalar function of time in seconds.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One sinusoidal component: amplitude, instantaneous frequency (Hz) and an
/// active interval `[onset, offset)`.
#[derive(Clone)]
pub struct ComponentSpec {
    pub amplitude: TimeFn,
    pub inst_freq: TimeFn,
    pub onset: f64,
    pub offset: f64,
    pub initial_phase: f64,
}

impl fmt::Debug for ComponentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComponentSpec")
            .field("onset", &self.onset)
            .field("offset", &self.offset)
            .field("initial_phase", &self.initial_phase)
            .finish_non_exhaustive()
    }
}

impl ComponentSpec {
    pub fn new(
        amplitude: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inst_freq: impl Fn(f64) -> f64 + Send + Sync + 'static,
        onset: f64,
        offset: f64,
    ) -> Self {
        Self {
            amplitude: Arc::new(amplitude),
            inst_freq: Arc::new(inst_freq),
            onset,
            offset,
            initial_phase: 0.0,
        }
    }

    /// Unit amplitude, active over all time.
    pub fn unit(inst_freq: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(|_| 1.0, inst_freq, 0.0, f64::INFINITY)
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.onset && t < self.offset
    }
}

/// Trapezoid sub-steps per sample interval in the phase integral.
const PHASE_SUBSTEPS: usize = 8;

/// Running phase `2π ∫_0^t f dτ` at every sample, by cumulative trapezoid.
fn phase_track(inst_freq: &TimeFn, n: usize, sample_rate: f64) -> Vec<f64> {
    let h = 1.0 / (sample_rate * PHASE_SUBSTEPS as f64);
    let mut phase = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = inst_freq(0.0);
    phase.push(0.0);
    for k in 1..n {
        for s in 1..=PHASE_SUBSTEPS {
            let t = ((k - 1) * PHASE_SUBSTEPS + s) as f64 * h;
            let f = inst_freq(t);
            acc += 0.5 * (prev + f) * h;
            prev = f;
        }
        phase.push(2.0 * PI * acc);
    }
    phase
}

fn check_components(components: &[ComponentSpec], n: usize, sample_rate: f64) -> Result<()> {
    for (p, c) in components.iter().enumerate() {
        if !(c.onset < c.offset) {
            return invalid(format!("component {p} has onset >= offset"));
        }
        for k in 0..n {
            let t = k as f64 / sample_rate;
            if !c.is_active(t) {
                continue;
            }
            let f = (c.inst_freq)(t);
            if !f.is_finite() || f.abs() >= sample_rate / 2.0 {
                return invalid(format!(
                    "component {p} reaches {f:.3} Hz at t = {t:.4} s, beyond the Nyquist frequency"
                ));
            }
        }
    }
    Ok(())
}

fn sample_count(duration: f64, sample_rate: f64) -> Result<usize> {
    if !(duration > 0.0 && sample_rate > 0.0) {
        return invalid("duration and sample rate must be positive");
    }
    Ok((duration * sample_rate).round() as usize)
}

/// Real multicomponent signal `Σ 1_p A_p sin(φ_p + 2π∫f_p)`.
pub fn synthesize(
    components: &[ComponentSpec],
    duration: f64,
    sample_rate: f64,
) -> Result<RealSignal> {
    let n = sample_count(duration, sample_rate)?;
    check_components(components, n, sample_rate)?;
    let mut samples = vec![0.0; n];
    for c in components {
        let phase = phase_track(&c.inst_freq, n, sample_rate);
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 / sample_rate;
            if c.is_active(t) {
                *s += (c.amplitude)(t) * (c.initial_phase + phase[k]).sin();
            }
        }
    }
    RealSignal::new(samples, sample_rate)
}

/// Complex multicomponent signal `Σ 1_p A_p exp(j(φ_p + 2π∫f_p))`.
pub fn synthesize_complex(
    components: &[ComponentSpec],
    duration: f64,
    sample_rate: f64,
) -> Result<AnalyticSignal> {
    let n = sample_count(duration, sample_rate)?;
    if n < 2 {
        return invalid("a signal needs at least two samples");
    }
    check_components(components, n, sample_rate)?;
    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    for c in components {
        let phase = phase_track(&c.inst_freq, n, sample_rate);
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 / sample_rate;
            if c.is_active(t) {
                *s += Complex64::from_polar((c.amplitude)(t), c.initial_phase + phase[k]);
            }
        }
    }
    Ok(AnalyticSignal { samples, sample_rate })
}

fn noise_scale(power: f64, snr_db: f64) -> Result<Option<f64>> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return invalid("SNR must be finite or +inf");
    }
    if snr_db == f64::INFINITY {
        return Ok(None);
    }
    Ok(Some((power / 10f64.powf(snr_db / 10.0)).sqrt()))
}

/// Adds white Gaussian noise at the given SNR. `+inf` returns the input unchanged.
pub fn add_awgn(x: &RealSignal, snr_db: f64, seed: u64) -> Result<RealSignal> {
    let Some(std) = noise_scale(x.power(), snr_db)? else {
        return Ok(x.clone());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("noise std is finite");
    let samples = x.samples.iter().map(|v| v + normal.sample(&mut rng)).collect();
    RealSignal::new(samples, x.sample_rate)
}

/// Complex counterpart of [`add_awgn`]; the noise power is split evenly
/// between the real and imaginary parts.
pub fn add_awgn_complex(z: &AnalyticSignal, snr_db: f64, seed: u64) -> Result<AnalyticSignal> {
    let power = z.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.len() as f64;
    let Some(std) = noise_scale(power, snr_db)? else {
        return Ok(z.clone());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std / 2f64.sqrt()).expect("noise std is finite");
    let samples = z
        .samples
        .iter()
        .map(|v| v + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    Ok(AnalyticSignal { samples, sample_rate: z.sample_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoidal_fm_matches_closed_form_phase() {
        let fs = 8000.0;
        let c = ComponentSpec::unit(|t| 100.0 + 50.0 * (2.0 * PI * t).sin());
        let x = synthesize(&[c], 2.0, fs).unwrap();
        for k in 0..(fs as usize / 4) {
            let t = k as f64 / fs;
            let want = (2.0 * PI * (100.0 * t - (50.0 / (2.0 * PI)) * ((2.0 * PI * t).cos() - 1.0))).sin();
            assert!((x.samples[k] - want).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn regenerating_at_double_rate_agrees_after_decimation() {
        for preset in [Preset::X1, Preset::X4, Preset::X6] {
            let comps = preset.components();
            let a = synthesize(&comps, preset.duration(), 4096.0).unwrap();
            let b = synthesize(&comps, preset.duration(), 8192.0).unwrap();
            let worst = a
                .samples
                .iter()
                .enumerate()
                .map(|(k, v)| (v - b.samples[2 * k]).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "{preset:?}: {worst}");
        }
    }

    #[test]
    fn above_nyquist_is_rejected() {
        let c = ComponentSpec::unit(|_| 300.0);
        assert!(synthesize(&[c], 1.0, 500.0).is_err());
    }

    #[test]
    fn inactive_component_contributes_nothing() {
        let c = ComponentSpec::new(|_| 1.0, |_| 10.0, 0.5, 1.0);
        let x = synthesize(&[c], 1.0, 100.0).unwrap();
        assert!(x.samples[..50].iter().all(|&v| v == 0.0));
        assert!(x.samples[50..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn awgn_infinite_snr_is_identity() {
        let x = synthesize(&Preset::X1.components(), 1.0, 512.0).unwrap();
        assert_eq!(add_awgn(&x, f64::INFINITY, 3).unwrap(), x);
    }

    #[test]
    fn awgn_zero_db_matches_signal_power() {
        let x = RealSignal::new(
            (0..100_000).map(|k| (0.01 * k as f64).sin()).collect(),
            1000.0,
        )
        .unwrap();
        let y = add_awgn(&x, 0.0, 42).unwrap();
        let noise: f64 = x
            .samples
            .iter()
            .zip(&y.samples)
            .map(|(a, b)| (b - a).powi(2))
            .sum::<f64>()
            / x.len() as f64;
        assert!((noise / x.power() - 1.0).abs() < 0.01);
    }

    #[test]
    fn awgn_is_seed_deterministic() {
        let x = synthesize(&Preset::X6.components(), 1.0, 512.0).unwrap();
        assert_eq!(add_awgn(&x, -5.0, 9).unwrap(), add_awgn(&x, -5.0, 9).unwrap());
        assert_ne!(add_awgn(&x, -5.0, 9).unwrap(), add_awgn(&x, -5.0, 10).unwrap());
        assert!(add_awgn(&x, f64::NAN, 1).is_err());
    }
}
