//! Instantaneous phase direction and curvature fields.

use nalgebra::DMatrix;

use crate::entropy::WeightField;
use crate::error::{invalid, Result};
use crate::grid::{Field, TfGrid};
use crate::kernels::{wrap_half_turn, Constellation};

/// Knot spacing of the smoothing spline, in pixels.
pub const SPLINE_KNOT_SPACING: f64 = 8.0;

/// Per-pixel direction of the winning kernel.
#[derive(Clone, Debug)]
pub struct IpdField {
    /// Angle of the winning kernel's long axis in pixel space, in `(-pi/2, pi/2]`.
    pub raw_theta: Field,
    /// Width of the winning kernel.
    pub raw_sigma: Field,
    pub smoothed: Field,
}

impl IpdField {
    /// Curvature in grid units (bins per step), `tan` of the raw angle.
    pub fn ipc_grid(&self) -> Field {
        self.raw_theta.map(f64::tan)
    }

    /// Curvature in rad/s per second.
    pub fn ipc_physical(&self, grid: &TfGrid) -> Field {
        let scale = grid.delta_omega / grid.delta_t;
        self.raw_theta.map(|t| scale * t.tan())
    }
}

/// Reads the argmax kernel at every pixel.
///
/// Only kernels of width at least one are materialized, so the winning angle
/// always labels the kernel's long axis.
pub fn extract_ipd(weights: &WeightField, c: &Constellation) -> Result<IpdField> {
    if weights.weights.len() != c.len() || c.is_empty() {
        return invalid("weights and constellation differ in length");
    }
    let (rows, cols) = weights.weights[0].shape();
    let mut raw_theta = Field::zeros(rows, cols);
    let mut raw_sigma = Field::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let spec = c.entries[weights.argmax(i, j)].spec();
            raw_theta[(i, j)] = spec.theta;
            raw_sigma[(i, j)] = spec.sigma;
        }
    }
    let smoothed = smooth_ipd(&raw_theta);
    Ok(IpdField { raw_theta, raw_sigma, smoothed })
}

/// Uniform cubic B-spline value.
fn bspline3(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        0.0
    }
}

/// Hat matrix of the least-squares cubic spline fit over `n` equally spaced
/// samples, knots no further apart than `spacing`.
fn spline_hat(n: usize, spacing: f64) -> DMatrix<f64> {
    if n < 4 {
        return DMatrix::identity(n, n);
    }
    let segments = (((n - 1) as f64 / spacing).ceil() as usize).max(1);
    let step = (n - 1) as f64 / segments as f64;
    let basis = DMatrix::from_fn(n, segments + 3, |i, k| bspline3(i as f64 / step - (k as f64 - 1.0)));
    let gram = basis.transpose() * &basis;
    match gram.cholesky() {
        Some(ch) => &basis * ch.solve(&basis.transpose()),
        None => DMatrix::identity(n, n),
    }
}

/// Tensor-product least-squares spline smoothing.
pub fn spline_smooth(f: &Field, spacing: f64) -> Field {
    let (rows, cols) = f.shape();
    let x = DMatrix::from_row_slice(rows, cols, f.as_slice());
    let sr = spline_hat(rows, spacing);
    let sc = spline_hat(cols, spacing);
    let y = sr * x * sc.transpose();
    Field::from_fn(rows, cols, |i, j| y[(i, j)])
}

/// Smooths an angle field defined modulo a half-turn by fitting the doubled
/// angle's sine and cosine separately and halving the recombined angle.
pub fn smooth_ipd(raw: &Field) -> Field {
    let s = spline_smooth(&raw.map(|t| (2.0 * t).sin()), SPLINE_KNOT_SPACING);
    let c = spline_smooth(&raw.map(|t| (2.0 * t).cos()), SPLINE_KNOT_SPACING);
    Field::from_fn(raw.rows(), raw.cols(), |i, j| wrap_half_turn(0.5 * s[(i, j)].atan2(c[(i, j)])))
}
