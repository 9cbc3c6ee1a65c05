//! Time-frequency lattice, dense 2-D fields and signal containers.
//!
//! Frequencies are carried in rad/s. Row `i` of a field sits at
//! `omega_min + i * delta_omega`, column `j` at `j * delta_t`.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Regular time-frequency lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfGrid {
    pub num_freq: usize,
    pub num_time: usize,
    /// rad/s per frequency bin.
    pub delta_omega: f64,
    /// Seconds per time step.
    pub delta_t: f64,
    /// rad/s at bin 0.
    pub omega_min: f64,
    /// Hz.
    pub sample_rate: f64,
}

impl TfGrid {
    pub fn new(
        num_freq: usize,
        num_time: usize,
        delta_omega: f64,
        delta_t: f64,
        omega_min: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let grid = Self { num_freq, num_time, delta_omega, delta_t, omega_min, sample_rate };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid spanning `[f_min, f_max]` Hz inclusive over `duration` seconds.
    pub fn from_hz(
        num_freq: usize,
        num_time: usize,
        f_min: f64,
        f_max: f64,
        duration: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        if num_freq < 2 || !(f_max > f_min) {
            return invalid("frequency band must hold at least two bins with f_max > f_min");
        }
        let delta_omega = 2.0 * PI * (f_max - f_min) / (num_freq - 1) as f64;
        Self::new(
            num_freq,
            num_time,
            delta_omega,
            duration / num_time as f64,
            2.0 * PI * f_min,
            sample_rate,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.num_freq < 2 || self.num_time < 2 {
            return invalid("grid needs at least 2 frequency bins and 2 time steps");
        }
        let finite = [self.delta_omega, self.delta_t, self.omega_min, self.sample_rate]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.delta_omega <= 0.0 || self.delta_t <= 0.0 || self.sample_rate <= 0.0 {
            return invalid("grid steps and sample rate must be positive and finite");
        }
        if self.omega_min < 0.0 {
            return invalid("grid band must start at a non-negative frequency");
        }
        if self.omega_max() > PI * self.sample_rate * (1.0 + 1e-12) {
            return invalid(format!(
                "grid band tops out at {:.3} Hz, above the Nyquist frequency {:.3} Hz",
                self.omega_max() / (2.0 * PI),
                self.sample_rate / 2.0
            ));
        }
        Ok(())
    }

    /// Highest represented frequency, rad/s.
    pub fn omega_max(&self) -> f64 {
        self.omega_min + (self.num_freq - 1) as f64 * self.delta_omega
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.omega_min + i as f64 * self.delta_omega
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.delta_t
    }

    pub fn f_min_hz(&self) -> f64 {
        self.omega_min / (2.0 * PI)
    }

    pub fn f_max_hz(&self) -> f64 {
        self.omega_max() / (2.0 * PI)
    }

    pub fn delta_f_hz(&self) -> f64 {
        self.delta_omega / (2.0 * PI)
    }

    /// Fractional bin index of a frequency in Hz.
    pub fn bin_of_hz(&self, f: f64) -> f64 {
        (2.0 * PI * f - self.omega_min) / self.delta_omega
    }

    /// Signal samples per time step. Fails unless the step is a whole number of samples.
    pub fn hop(&self) -> Result<usize> {
        let hop = self.delta_t * self.sample_rate;
        let rounded = hop.round();
        if rounded < 1.0 || (hop - rounded).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "time step covers {hop} samples; it must be a positive whole number"
            )));
        }
        Ok(rounded as usize)
    }

    /// The kernel width at which discretized kernels are isotropic in pixels.
    pub fn sigma_iso(&self) -> f64 {
        (self.delta_t / self.delta_omega).sqrt()
    }

    /// Pixels per dimensionless kernel unit, identical on both axes.
    pub fn pixel_scale(&self) -> f64 {
        1.0 / (self.delta_t * self.delta_omega).sqrt()
    }
}

/// Dense row-major 2-D array of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!("{} values do not fill a {rows}x{cols} field", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Field, factor: f64) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// Sub-array `[r0, r0+rows) x [c0, c0+cols)`; must lie inside.
    pub fn window(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Field {
        Field::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Reverse both axes.
    pub fn flipped(&self) -> Field {
        Field::from_fn(self.rows, self.cols, |i, j| self[(self.rows - 1 - i, self.cols - 1 - j)])
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Field {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Field {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// A real-valued field laid out on a grid, rows = frequency, columns = time.
#[derive(Clone, Debug, PartialEq)]
pub struct Tfr {
    pub grid: TfGrid,
    pub values: Field,
    pub label: String,
    /// Set for distributions that may go negative (the WVD).
    pub signed: bool,
}

impl Tfr {
    pub fn new(grid: TfGrid, values: Field, label: impl Into<String>) -> Result<Self> {
        Self::build(grid, values, label.into(), false)
    }

    pub fn new_signed(grid: TfGrid, values: Field, label: impl Into<String>) -> Result<Self> {
        Self::build(grid, values, label.into(), true)
    }

    fn build(grid: TfGrid, values: Field, label: String, signed: bool) -> Result<Self> {
        if values.shape() != (grid.num_freq, grid.num_time) {
            return invalid(format!(
                "field is {}x{} but the grid is {}x{}",
                values.rows(),
                values.cols(),
                grid.num_freq,
                grid.num_time
            ));
        }
        if values.as_slice().iter().any(|v| !v.is_finite()) {
            return invalid("time-frequency values must be finite");
        }
        if !signed && values.as_slice().iter().any(|&v| v < 0.0) {
            return invalid("energy distributions must be non-negative");
        }
        Ok(Self { grid, values, label, signed })
    }
}

/// Real samples at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl RealSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.len() < 2 {
            return invalid("a signal needs at least two samples");
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return invalid("signal samples must be finite");
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return invalid("sample rate must be positive");
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean square amplitude.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }
}

/// Complex analytic samples at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl AnalyticSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.sample_rate
    }
}
