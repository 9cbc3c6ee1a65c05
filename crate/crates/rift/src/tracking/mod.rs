//! Direction fields, ridge tracking and the track-based Spline-RIFT.

mod hungarian;
mod ipd;
mod tracker;

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Field, TfGrid, Tfr};
use crate::signals::column_weights;

pub use hungarian::{assignment_cost, hungarian};
pub use ipd::{extract_ipd, smooth_ipd, spline_smooth, IpdField, SPLINE_KNOT_SPACING};
pub use tracker::{detect_peaks, track, Track, TrackPoint, TrackStatus, TrackerConfig};

/// Draws each track's filtered path with anti-aliased column spans. Each
/// column's span carries the value of `itfr` at the nearest on-curve pixel.
pub fn spline_rift(tracks: &[Track], itfr: &Tfr) -> Result<Tfr> {
    let (rows, cols) = itfr.values.shape();
    let mut out = Field::zeros(rows, cols);
    for t in tracks {
        let first = t.first_step();
        let bins: Vec<f64> = t.history.iter().map(|p| p.state[0]).collect();
        for (k, &y) in bins.iter().enumerate() {
            let j = first + k;
            if j >= cols {
                break;
            }
            let left = if k > 0 { 0.5 * (bins[k - 1] + y) } else { y };
            let right = if k + 1 < bins.len() { 0.5 * (bins[k + 1] + y) } else { y };
            let row = y.round();
            if row < 0.0 || row >= rows as f64 {
                continue;
            }
            let intensity = itfr.values[(row as usize, j)];
            for (r, w) in column_weights(left.min(right), left.max(right)) {
                if r >= 0 && (r as usize) < rows {
                    out[(r as usize, j)] += intensity * w;
                }
            }
        }
    }
    Tfr::new(itfr.grid, out, "spline_rift")
}

/// Writes `track_id,time_s,freq_hz,freq_velocity_hz_per_s,status` rows.
pub fn write_tracks_csv<W: Write>(tracks: &[Track], grid: &TfGrid, out: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["track_id", "time_s", "freq_hz", "freq_velocity_hz_per_s", "status"]).map_err(csv_err)?;
    let df = grid.delta_f_hz();
    for t in tracks {
        for p in &t.history {
            w.write_record([
                t.id.to_string(),
                format!("{:.9}", grid.time(p.step)),
                format!("{:.6}", grid.f_min_hz() + p.state[0] * df),
                format!("{:.6}", p.state[1] * df / grid.delta_t),
                t.status.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
