//! Fractional wavelet transforms, the discrete Wigner-Ville distribution and
//! the isotropic wavelet baseline.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::fourier::next_fast_len;
use crate::grid::{AnalyticSignal, Field, TfGrid, Tfr};
use crate::kernels::{
    make_window, window_half_len, Constellation, ImplementedKernel, KernelSpec, Window,
};

fn check_rates(z: &AnalyticSignal, grid: &TfGrid) -> Result<usize> {
    if (z.sample_rate - grid.sample_rate).abs() > 1e-9 * grid.sample_rate {
        return invalid(format!(
            "signal is sampled at {} Hz but the grid expects {} Hz",
            z.sample_rate, grid.sample_rate
        ));
    }
    let hop = grid.hop()?;
    if (grid.num_time - 1) * hop >= z.len() {
        return invalid(format!(
            "grid spans {} samples but the signal has only {}",
            (grid.num_time - 1) * hop + 1,
            z.len()
        ));
    }
    Ok(hop)
}

/// Squared magnitude of the wavelet transform with a prepared window.
///
/// Row `i` is `|z * h_i|^2` with `h_i[m] = Ts * conj(w[m]) * exp(j omega_i m Ts)`,
/// sampled every `hop` samples.
pub fn cfwt_with_window(z: &AnalyticSignal, window: &Window, grid: &TfGrid) -> Result<Tfr> {
    let hop = check_rates(z, grid)?;
    let ts = 1.0 / grid.sample_rate;
    let half = window.half_len;
    let taps = window.taps.len();
    let size = next_fast_len(z.len() + taps - 1);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];

    let mut spectrum = vec![Complex64::new(0.0, 0.0); size];
    spectrum[..z.len()].copy_from_slice(&z.samples);
    fwd.process_with_scratch(&mut spectrum, &mut scratch);

    let scale = ts / size as f64;
    let mut values = Field::zeros(grid.num_freq, grid.num_time);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for i in 0..grid.num_freq {
        let omega = grid.omega(i);
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (k, w) in window.taps.iter().enumerate() {
            let m = k as f64 - half as f64;
            buf[k] = w.conj() * Complex64::from_polar(scale, omega * m * ts);
        }
        fwd.process_with_scratch(&mut buf, &mut scratch);
        for (b, s) in buf.iter_mut().zip(&spectrum) {
            *b *= s;
        }
        inv.process_with_scratch(&mut buf, &mut scratch);
        let row = values.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = buf[j * hop + half].norm_sqr();
        }
    }
    Tfr::new(*grid, values, "cfwt")
}

/// Wavelet transform for an implemented kernel, with the default window support.
pub fn cfwt(z: &AnalyticSignal, kernel: &ImplementedKernel, grid: &TfGrid) -> Result<Tfr> {
    let ts = 1.0 / grid.sample_rate;
    let sigma_iso = grid.sigma_iso();
    let window = make_window(kernel, sigma_iso, ts, window_half_len(kernel, sigma_iso, ts))?;
    cfwt_with_window(z, &window, grid)
}

/// One transform per constellation entry, in entry order.
#[derive(Clone, Debug)]
pub struct CfwtBank {
    pub grid: TfGrid,
    pub fields: Vec<Tfr>,
    /// Constellation grid points each field stands for.
    pub multiplicity: Vec<usize>,
}

impl CfwtBank {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Transforms `z` with every entry of the constellation.
pub fn cfwt_bank(z: &AnalyticSignal, c: &Constellation, grid: &TfGrid) -> Result<CfwtBank> {
    check_rates(z, grid)?;
    let fields = c
        .entries
        .par_iter()
        .map(|e| cfwt_with_window(z, &e.window, grid))
        .collect::<Result<Vec<_>>>()?;
    let multiplicity = c.entries.iter().map(|e| e.multiplicity).collect();
    Ok(CfwtBank { grid: *grid, fields, multiplicity })
}

/// Isotropic wavelet transform at the grid's isotropic width.
pub fn cwt_baseline(z: &AnalyticSignal, grid: &TfGrid) -> Result<Tfr> {
    let kernel = ImplementedKernel::realize(KernelSpec::new(1.0, 0.0)?)?;
    let mut t = cfwt(z, &kernel, grid)?;
    t.label = "cwt".into();
    Ok(t)
}

/// Discrete Wigner-Ville distribution on the grid.
///
/// At each column the lag runs over the largest symmetric window that stays
/// inside the signal: `W(omega, t_n) = (Ts/pi) [r0 + 2 Re sum_{m>0} r_m e^{-j 2 omega m Ts}]`
/// with `r_m = z[n+m] conj(z[n-m])`.
pub fn wvd(z: &AnalyticSignal, grid: &TfGrid) -> Result<Tfr> {
    let hop = check_rates(z, grid)?;
    let ts = 1.0 / grid.sample_rate;
    let n = z.len();
    let max_lag = (n - 1) / 2;
    let (u, v) = (grid.num_freq, grid.num_time);
    // twiddle[i * (max_lag+1) + m] = e^{-j 2 omega_i m Ts}
    let stride = max_lag + 1;
    let mut twiddle = vec![Complex64::new(0.0, 0.0); u * stride];
    for i in 0..u {
        let step = -2.0 * grid.omega(i) * ts;
        for m in 0..stride {
            twiddle[i * stride + m] = Complex64::from_polar(1.0, step * m as f64);
        }
    }
    let columns: Vec<Vec<f64>> = (0..v)
        .into_par_iter()
        .map(|j| {
            let c = j * hop;
            let lag = c.min(n - 1 - c);
            let r: Vec<Complex64> =
                (0..=lag).map(|m| z.samples[c + m] * z.samples[c - m].conj()).collect();
            (0..u)
                .map(|i| {
                    let tw = &twiddle[i * stride..i * stride + lag + 1];
                    let tail: f64 =
                        r[1..].iter().zip(&tw[1..]).map(|(a, b)| (a * b).re).sum();
                    ts / PI * (r[0].re + 2.0 * tail)
                })
                .collect()
        })
        .collect();
    let values = Field::from_fn(u, v, |i, j| columns[j][i]);
    Tfr::new_signed(*grid, values, "wvd")
}
