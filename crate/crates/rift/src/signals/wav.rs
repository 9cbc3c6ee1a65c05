use std::path::Path;

use hound::{SampleFormat, WavReader};

use crate::error::{Error, Result};
use crate::grid::RealSignal;

fn map_err(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported | hound::Error::TooWide => {
            Error::UnsupportedFormat("WAV encoding not supported".into())
        }
        other => Error::Parse(format!("malformed WAV: {other}")),
    }
}

/// Reads 16-bit PCM or 32-bit float WAV, mono or stereo. Stereo is averaged
/// and integer samples are scaled by 1/32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<RealSignal> {
    let file = std::io::BufReader::new(std::fs::File::open(path.as_ref())?);
    let reader = WavReader::new(file).map_err(map_err)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedFormat(format!("{} channels", spec.channels)));
    }
    let declared = reader.len() as usize;
    let raw: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_err)?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_err)?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!("{bits}-bit {fmt:?} samples")));
        }
    };
    if raw.len() != declared {
        return Err(Error::Parse(format!(
            "data chunk declares {declared} samples but only {} are present",
            raw.len()
        )));
    }
    let channels = spec.channels as usize;
    let samples: Vec<f64> =
        raw.chunks_exact(channels).map(|c| c.iter().sum::<f64>() / channels as f64).collect();
    RealSignal::new(samples, spec.sample_rate as f64)
}
