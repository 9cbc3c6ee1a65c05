//! Reference ITFR: component trajectories drawn as anti-aliased lines and
//! lightly blurred into a tolerance tube.

use super::ComponentSpec;
use crate::error::Result;
use crate::grid::{Field, TfGrid, Tfr};

/// Per-column frequency (Hz) and amplitude of one component; `None` where inactive.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub freq_hz: Vec<Option<f64>>,
    pub amplitude: Vec<f64>,
}

/// Reference raster plus its tube weights.
#[derive(Clone, Debug)]
pub struct ReferenceItfr {
    /// Blurred reference `C`.
    pub tfr: Tfr,
    /// Raster before the tube blur.
    pub sharp: Field,
    /// `C / max C`.
    pub tube_weights: Field,
    pub tube_sigma: f64,
    pub curves: Vec<Trajectory>,
    /// Set when some trajectory left the band and was clipped.
    pub clipped: bool,
}

/// Samples each component's instantaneous frequency and amplitude at the grid columns.
pub fn trajectories(components: &[ComponentSpec], grid: &TfGrid) -> Vec<Trajectory> {
    components
        .iter()
        .map(|c| {
            let mut freq_hz = Vec::with_capacity(grid.num_time);
            let mut amplitude = Vec::with_capacity(grid.num_time);
            for j in 0..grid.num_time {
                let t = grid.time(j);
                if c.is_active(t) {
                    freq_hz.push(Some((c.inst_freq)(t)));
                    amplitude.push((c.amplitude)(t));
                } else {
                    freq_hz.push(None);
                    amplitude.push(0.0);
                }
            }
            Trajectory { freq_hz, amplitude }
        })
        .collect()
}

/// Antiderivative of the unit tent `max(0, 1 - |x|)`.
fn tent_integral(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x <= 0.0 {
        0.5 * (x + 1.0).powi(2)
    } else if x <= 1.0 {
        1.0 - 0.5 * (1.0 - x).powi(2)
    } else {
        1.0
    }
}

/// Row weights for one column of an anti-aliased line covering `[lo, hi]` in
/// fractional rows. A zero-length span reduces to the classic two-pixel split.
/// Weights sum to one over all integer rows.
pub fn column_weights(lo: f64, hi: f64) -> Vec<(i64, f64)> {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let len = hi - lo;
    let first = lo.floor() as i64 - 1;
    let last = hi.ceil() as i64 + 1;
    let mut out = Vec::new();
    for r in first..=last {
        let w = if len < 1e-9 {
            (1.0 - (lo - r as f64).abs()).max(0.0)
        } else {
            (tent_integral(hi - r as f64) - tent_integral(lo - r as f64)) / len
        };
        if w > 0.0 {
            out.push((r, w));
        }
    }
    out
}

/// Draws each trajectory column by column. Column `j` covers the curve from the
/// midpoint with its left neighbour to the midpoint with its right neighbour,
/// carrying weight `A²` sampled at column `j`. Returns the raster and whether
/// any weight fell outside the band.
fn draw(curves: &[Trajectory], grid: &TfGrid) -> (Field, bool) {
    let mut raster = Field::zeros(grid.num_freq, grid.num_time);
    let mut clipped = false;
    let v = grid.num_time;
    for curve in curves {
        let bins: Vec<Option<f64>> =
            curve.freq_hz.iter().map(|f| f.map(|f| grid.bin_of_hz(f))).collect();
        for j in 0..v {
            let Some(y) = bins[j] else { continue };
            let left = if j > 0 { bins[j - 1].map_or(y, |p| 0.5 * (p + y)) } else { y };
            let right = if j + 1 < v { bins[j + 1].map_or(y, |q| 0.5 * (q + y)) } else { y };
            let mass = curve.amplitude[j].powi(2);
            for (r, w) in column_weights(left.min(right), left.max(right)) {
                if r < 0 || r >= grid.num_freq as i64 {
                    clipped = true;
                    continue;
                }
                raster[(r as usize, j)] += mass * w;
            }
        }
    }
    (raster, clipped)
}

/// Normalized Gaussian taps truncated at `ceil(4σ)`.
pub(crate) fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let half = (4.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> =
        (-half..=half).map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Half-sample symmetric reflection of an index into `[0, n)`.
fn reflect(mut x: i64, n: i64) -> usize {
    loop {
        if x < 0 {
            x = -1 - x;
        } else if x >= n {
            x = 2 * n - 1 - x;
        } else {
            return x as usize;
        }
    }
}

/// Separable Gaussian blur that scatters each pixel's mass and folds whatever
/// lands outside back in by reflection, so total mass is conserved exactly.
pub(crate) fn blur_reflect(field: &Field, sigma: f64) -> Field {
    if sigma <= 0.0 {
        return field.clone();
    }
    let taps = gaussian_taps(sigma);
    let half = (taps.len() / 2) as i64;
    let (rows, cols) = field.shape();
    let mut tmp = Field::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = field[(i, j)];
            if v == 0.0 {
                continue;
            }
            for (k, t) in taps.iter().enumerate() {
                let jj = reflect(j as i64 + k as i64 - half, cols as i64);
                tmp[(i, jj)] += v * t;
            }
        }
    }
    let mut out = Field::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = tmp[(i, j)];
            if v == 0.0 {
                continue;
            }
            for (k, t) in taps.iter().enumerate() {
                let ii = reflect(i as i64 + k as i64 - half, rows as i64);
                out[(ii, j)] += v * t;
            }
        }
    }
    out
}

/// Rasterizes the trajectories and blurs them by `tube_sigma` pixels.
pub fn rasterize_itfr(
    curves: &[Trajectory],
    grid: &TfGrid,
    tube_sigma: f64,
) -> Result<ReferenceItfr> {
    let (sharp, clipped) = draw(curves, grid);
    let blurred = blur_reflect(&sharp, tube_sigma);
    let peak = blurred.max();
    let tube_weights = if peak > 0.0 { blurred.map(|v| v / peak) } else { blurred.clone() };
    Ok(ReferenceItfr {
        tfr: Tfr::new(*grid, blurred, "reference")?,
        sharp,
        tube_weights,
        tube_sigma,
        curves: curves.to_vec(),
        clipped,
    })
}
