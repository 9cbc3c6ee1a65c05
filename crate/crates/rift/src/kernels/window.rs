//! Sampled wavelet windows and their Cohen's-class kernel rasters.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::mapping::ImplementedKernel;
use crate::error::{Error, Result};
use crate::grid::{Field, TfGrid};

/// Window support in envelope standard deviations.
pub const WINDOW_SUPPORT_STDS: f64 = 6.0;
/// Raster support in marginal standard deviations.
pub const RASTER_SUPPORT_STDS: f64 = 6.0;

/// Complex window taps centred on index `half_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub taps: Vec<Complex64>,
    pub half_len: usize,
    pub sample_period: f64,
}

/// Physical standard deviation (seconds) of the window envelope `|taps|`.
pub fn envelope_std(kernel: &ImplementedKernel, sigma_iso: f64) -> f64 {
    kernel.sigma0 * sigma_iso
}

/// Smallest half-length satisfying the support rule.
pub fn window_half_len(kernel: &ImplementedKernel, sigma_iso: f64, sample_period: f64) -> usize {
    (WINDOW_SUPPORT_STDS * envelope_std(kernel, sigma_iso) / sample_period).ceil() as usize
}

/// Samples the chirped Gaussian window for `kernel` at `sample_period`.
///
/// Time is scaled by `sigma_iso`, so the chirp rate in physical units is
/// `tan(kappa) / sigma_iso^2`. Taps are normalized to unit energy,
/// `sum |taps|^2 * sample_period = 1`.
pub fn make_window(
    kernel: &ImplementedKernel,
    sigma_iso: f64,
    sample_period: f64,
    half_len: usize,
) -> Result<Window> {
    let needed = window_half_len(kernel, sigma_iso, sample_period);
    if half_len < needed {
        return Err(Error::InvalidConfig(format!(
            "window half-length {half_len} below the required {needed} samples"
        )));
    }
    let width = 1.0 / (kernel.sigma0 * kernel.sigma0);
    let chirp = kernel.kappa.tan();
    let mut taps: Vec<Complex64> = (0..=2 * half_len)
        .map(|k| {
            let s = (k as f64 - half_len as f64) * sample_period / sigma_iso;
            let arg = Complex64::new(-0.5 * s * s * width, 0.5 * s * s * chirp);
            arg.exp()
        })
        .collect();
    let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum::<f64>() * sample_period;
    let scale = 1.0 / energy.sqrt();
    taps.iter_mut().for_each(|t| *t *= scale);
    Ok(Window { taps, half_len, sample_period })
}

/// Kernel raster half-extents `(rows, cols)` covering the support rule.
pub fn raster_half_support(kernel: &ImplementedKernel, grid: &TfGrid) -> (usize, usize) {
    let c = kernel.covariance();
    let g = grid.pixel_scale();
    let rows = (RASTER_SUPPORT_STDS * c[1][1].sqrt() * g).ceil() as usize;
    let cols = (RASTER_SUPPORT_STDS * c[0][0].sqrt() * g).ceil() as usize;
    (rows.max(1), cols.max(1))
}

/// Cohen's-class kernel of `kernel` sampled on the grid pixels with the
/// pixel area absorbed, centred at `(half_rows, half_cols)`.
pub fn cohen_kernel_with_support(
    kernel: &ImplementedKernel,
    grid: &TfGrid,
    half_rows: usize,
    half_cols: usize,
) -> Field {
    let h = 1.0 / grid.pixel_scale();
    let inv = kernel.inverse_covariance();
    let norm = h * h / PI;
    Field::from_fn(2 * half_rows + 1, 2 * half_cols + 1, |i, j| {
        let w = (i as f64 - half_rows as f64) * h;
        let s = (j as f64 - half_cols as f64) * h;
        let q = inv[0][0] * s * s + 2.0 * inv[0][1] * s * w + inv[1][1] * w * w;
        norm * (-0.5 * q).exp()
    })
}

/// Cohen's-class kernel raster with automatic support.
pub fn cohen_kernel(kernel: &ImplementedKernel, grid: &TfGrid) -> Field {
    let (hr, hc) = raster_half_support(kernel, grid);
    cohen_kernel_with_support(kernel, grid, hr, hc)
}
