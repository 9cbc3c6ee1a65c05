//! Column peak picking and multi-target Kalman tracking with global
//! nearest-neighbour association.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use crate::error::{invalid, Result};
use crate::grid::Field;

/// Strict interior local maxima at or above `min_height_frac` of the column
/// maximum, thinned greedily so kept peaks are at least `min_separation`
/// bins apart. Returned tallest first; equal heights keep the lower bin first.
pub fn detect_peaks(column: &[f64], min_height_frac: f64, min_separation: usize) -> Vec<(usize, f64)> {
    let top = column.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 || column.len() < 3 {
        return Vec::new();
    }
    let floor = min_height_frac * top;
    let mut cands: Vec<(usize, f64)> = (1..column.len() - 1)
        .filter(|&i| column[i] > column[i - 1] && column[i] > column[i + 1] && column[i] >= floor)
        .map(|i| (i, column[i]))
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| k.0.abs_diff(c.0) >= min_separation) {
            kept.push(c);
        }
    }
    kept
}

/// Vertex of the parabola through the peak and its neighbours.
fn refine(column: &[f64], i: usize) -> f64 {
    let (a, b, c) = (column[i - 1], column[i], column[i + 1]);
    let den = a - 2.0 * b + c;
    if den < 0.0 {
        i as f64 + (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    } else {
        i as f64
    }
}

/// Tracker settings. Units are frequency bins and time steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Process noise scale, bins per step squared.
    pub process_scale: f64,
    pub sigma_y: f64,
    pub sigma_ydot: f64,
    /// Consecutive associated steps before a new track is confirmed.
    pub birth_steps: usize,
    /// Consecutive unassociated steps before a track is terminated.
    pub death_steps: usize,
    /// Association likelihoods below this count as misses.
    pub likelihood_floor: f64,
    pub min_height_frac: f64,
    /// Peaks below this fraction of the whole field's maximum are ignored.
    pub min_height_global: f64,
    pub min_separation: usize,
    /// Observed slopes are clamped to this many bins per step.
    pub max_velocity: f64,
    /// Confirmed tracks shorter than this many steps are dropped.
    pub min_length: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            process_scale: 0.1,
            sigma_y: 2.0,
            sigma_ydot: 1.0,
            birth_steps: 3,
            death_steps: 24,
            likelihood_floor: 1e-6,
            min_height_frac: 0.1,
            min_height_global: 0.05,
            min_separation: 3,
            max_velocity: 8.0,
            min_length: 1,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.sigma_y, self.sigma_ydot, self.likelihood_floor, self.max_velocity];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(self.process_scale >= 0.0) {
            return invalid("tracker noise scales, floor and velocity limit must be positive");
        }
        if self.birth_steps == 0 || self.death_steps == 0 || self.min_separation == 0 {
            return invalid("tracker step counts and peak separation must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_height_frac) || !(0.0..=1.0).contains(&self.min_height_global) {
            return invalid("peak height fractions must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Terminated,
}

impl TrackStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Terminated => "terminated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackPoint {
    pub step: usize,
    /// `(bin, bins per step)`.
    pub state: Vector2<f64>,
    pub covariance: Matrix2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: usize,
    pub status: TrackStatus,
    pub history: Vec<TrackPoint>,
    hits: usize,
    misses: usize,
    /// History length at the last associated step.
    anchored: usize,
}

impl Track {
    fn last(&self) -> &TrackPoint {
        self.history.last().expect("tracks are never empty")
    }

    pub fn first_step(&self) -> usize {
        self.history[0].step
    }

    pub fn last_step(&self) -> usize {
        self.last().step
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Bin position at `step`, if the track covers it.
    pub fn bin_at(&self, step: usize) -> Option<f64> {
        let first = self.first_step();
        if step < first || step > self.last_step() {
            return None;
        }
        self.history.get(step - first).map(|p| p.state[0])
    }
}

/// One detection: refined bin, height and observed slope.
#[derive(Clone, Copy, Debug)]
struct Detection {
    bin: f64,
    slope: f64,
}

fn gaussian_likelihood(innov: Vector2<f64>, s: &Matrix2<f64>) -> f64 {
    let det = s.determinant();
    match s.try_inverse() {
        Some(inv) if det > 0.0 => {
            let q = (innov.transpose() * inv * innov)[(0, 0)];
            (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
        }
        _ => 0.0,
    }
}

struct Filter {
    f: Matrix2<f64>,
    q: Matrix2<f64>,
    r: Matrix2<f64>,
}

impl Filter {
    fn new(cfg: &TrackerConfig) -> Self {
        let e2 = cfg.process_scale * cfg.process_scale;
        Filter {
            f: Matrix2::new(1.0, 1.0, 0.0, 1.0),
            q: Matrix2::new(0.25, 0.5, 0.5, 1.0) * e2,
            r: Matrix2::new(cfg.sigma_y * cfg.sigma_y, 0.0, 0.0, cfg.sigma_ydot * cfg.sigma_ydot),
        }
    }

    fn predict(&self, p: &TrackPoint) -> TrackPoint {
        TrackPoint {
            step: p.step + 1,
            state: self.f * p.state,
            covariance: self.f * p.covariance * self.f.transpose() + self.q,
        }
    }

    fn update(&self, pred: &TrackPoint, z: Vector2<f64>) -> TrackPoint {
        let s = pred.covariance + self.r;
        let k = pred.covariance * s.try_inverse().unwrap_or_else(Matrix2::zeros);
        let ik = Matrix2::identity() - k;
        let p = ik * pred.covariance * ik.transpose() + k * self.r * k.transpose();
        TrackPoint { step: pred.step, state: pred.state + k * (z - pred.state), covariance: 0.5 * (p + p.transpose()) }
    }
}

/// Solves the gated association of `tracks` (predictions) against the
/// detections in `free`. Returns `(track, detection)` pairs.
fn associate(preds: &[(usize, TrackPoint)], dets: &[Detection], free: &[usize], filter: &Filter, floor: f64) -> Result<Vec<(usize, usize)>> {
    let (nt, nd) = (preds.len(), free.len());
    if nt == 0 || nd == 0 {
        return Ok(Vec::new());
    }
    let n = nt + nd;
    let miss = -floor.ln();
    let blocked = 1e6 + 10.0 * miss;
    let mut cost = vec![vec![0.0; n]; n];
    for (a, (_, p)) in preds.iter().enumerate() {
        let s = p.covariance + filter.r;
        for (b, &d) in free.iter().enumerate() {
            let z = Vector2::new(dets[d].bin, dets[d].slope);
            let l = gaussian_likelihood(z - p.state, &s);
            cost[a][b] = if l >= floor { -l.ln() } else { blocked };
        }
        for b in nd..n {
            cost[a][b] = miss;
        }
    }
    let assignment = hungarian(&cost)?;
    Ok((0..nt)
        .filter(|&a| assignment[a] < nd && cost[a][assignment[a]] < blocked)
        .map(|a| (preds[a].0, free[assignment[a]]))
        .collect())
}

/// Tracks ridges through `itfr` column by column. Observed slopes are read
/// from `ipd` (pixel-space angles) at each detection.
pub fn track(itfr: &Field, ipd: &Field, cfg: &TrackerConfig) -> Result<Vec<Track>> {
    cfg.validate()?;
    if itfr.shape() != ipd.shape() {
        return invalid("ITFR and IPD fields differ in shape");
    }
    if itfr.as_slice().iter().any(|&v| !(v >= 0.0)) {
        return invalid("ITFR must be non-negative");
    }
    let (rows, cols) = itfr.shape();
    let global = cfg.min_height_global * itfr.max();
    let detections: Vec<Vec<Detection>> = (0..cols)
        .into_par_iter()
        .map(|j| {
            let column = itfr.column(j);
            detect_peaks(&column, cfg.min_height_frac, cfg.min_separation)
                .into_iter()
                .filter(|&(_, h)| h > 0.0 && h >= global)
                .map(|(i, _)| {
                    let bin = refine(&column, i);
                    let row = (bin.round() as usize).min(rows - 1);
                    let slope = ipd[(row, j)].tan().clamp(-cfg.max_velocity, cfg.max_velocity);
                    Detection { bin, slope }
                })
                .collect()
        })
        .collect();

    let filter = Filter::new(cfg);
    let mut live: Vec<Track> = Vec::new();
    let mut done: Vec<Track> = Vec::new();
    let mut next_id = 0;
    for (j, dets) in detections.iter().enumerate() {
        let mut free: Vec<usize> = (0..dets.len()).collect();
        let mut updated: Vec<Option<TrackPoint>> = vec![None; live.len()];
        // Confirmed tracks claim detections before tentative ones.
        for tier in [TrackStatus::Confirmed, TrackStatus::Tentative] {
            let preds: Vec<(usize, TrackPoint)> = live
                .iter()
                .enumerate()
                .filter(|(_, t)| t.status == tier)
                .map(|(k, t)| (k, filter.predict(t.last())))
                .collect();
            let pairs = associate(&preds, dets, &free, &filter, cfg.likelihood_floor)?;
            for (k, d) in pairs {
                let pred = &preds.iter().find(|p| p.0 == k).unwrap().1;
                updated[k] = Some(filter.update(pred, Vector2::new(dets[d].bin, dets[d].slope)));
                free.retain(|&x| x != d);
            }
        }
        let mut survivors = Vec::with_capacity(live.len());
        for (mut t, up) in live.drain(..).zip(updated) {
            match up {
                Some(p) => {
                    t.history.push(p);
                    t.hits += 1;
                    t.misses = 0;
                    t.anchored = t.history.len();
                    if t.status == TrackStatus::Tentative && t.hits >= cfg.birth_steps {
                        t.status = TrackStatus::Confirmed;
                    }
                    survivors.push(t);
                }
                None if t.status == TrackStatus::Tentative => {}
                None => {
                    t.misses += 1;
                    if t.misses >= cfg.death_steps {
                        t.history.truncate(t.anchored);
                        t.status = TrackStatus::Terminated;
                        done.push(t);
                    } else {
                        let p = filter.predict(t.last());
                        t.history.push(p);
                        survivors.push(t);
                    }
                }
            }
        }
        live = survivors;
        for d in free {
            let status = if cfg.birth_steps <= 1 { TrackStatus::Confirmed } else { TrackStatus::Tentative };
            live.push(Track {
                id: 0,
                status,
                history: vec![TrackPoint {
                    step: j,
                    state: Vector2::new(dets[d].bin, dets[d].slope),
                    covariance: filter.r,
                }],
                hits: 1,
                misses: 0,
                anchored: 1,
            });
        }
    }
    for mut t in live {
        if t.status == TrackStatus::Confirmed {
            t.history.truncate(t.anchored);
            done.push(t);
        }
    }
    done.retain(|t| t.len() >= cfg.min_length.max(1));
    done.sort_by_key(|t| (t.first_step(), (t.history[0].state[0] * 1e6).round() as i64));
    for t in &mut done {
        t.id = next_id;
        next_id += 1;
    }
    Ok(done)
}
