//! End-to-end runs: signal, constellation bank, entropy weights,
//! deconvolution, direction field, tracking and evaluation.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, SignalSource};
use crate::deconv::{composites, lr_tv_blockwise};
use crate::entropy::weight_field;
use crate::error::{Error, Result};
use crate::grid::{AnalyticSignal, Field, TfGrid, Tfr};
use crate::io::{write_render, FieldFile};
use crate::kernels::{build_constellation, Constellation};
use crate::metrics::{combined_score, reports_to_json, snr_label, write_reports_csv, MetricsReport};
use crate::signals::{load_wav, rasterize_itfr, trajectories, PresetSignal, ReferenceItfr};
use crate::tracking::{extract_ipd, spline_rift, track, write_tracks_csv, IpdField, Track};
use crate::transforms::{cfwt_bank, cwt_baseline, wvd};

/// Representations that can be scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cwt,
    Wvd,
    Rift,
    SplineRift,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cwt, Method::Wvd, Method::Rift, Method::SplineRift];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Cwt => "cwt",
            Method::Wvd => "wvd",
            Method::Rift => "rift",
            Method::SplineRift => "spline_rift",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("spline") && *m == Method::SplineRift))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}' (cwt, wvd, rift, spline_rift)")))
    }
}

/// Signal on its grid, with the reference when the source is a preset.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub name: String,
    pub grid: TfGrid,
    pub signal: AnalyticSignal,
    pub reference: Option<ReferenceItfr>,
}

/// Builds the grid and analytic signal, adding noise when configured.
pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let g = &cfg.grid;
    match &cfg.signal {
        SignalSource::Preset(p) => {
            let (lo, hi) = p.band_hz();
            let grid = TfGrid::from_hz(
                g.num_freq,
                g.num_time,
                g.f_min_hz.unwrap_or(lo),
                g.f_max_hz.unwrap_or(hi),
                p.duration(),
                p.sample_rate(),
            )?;
            let mut sig = p.signal()?;
            if let Some(snr) = cfg.snr_db {
                sig = sig.with_noise(snr, cfg.seed)?;
            }
            let reference = rasterize_itfr(&trajectories(&p.components(), &grid), &grid, cfg.tube_sigma)?;
            Ok(Prepared { name: p.name().into(), grid, signal: sig.analytic()?, reference: Some(reference) })
        }
        SignalSource::Wav(path) => {
            let mut x = load_wav(path)?;
            // Trim to a whole number of samples per time step.
            let hop = x.len() / g.num_time;
            if hop == 0 {
                return Err(Error::InvalidConfig(format!(
                    "{} samples cannot fill {} time steps",
                    x.len(),
                    g.num_time
                )));
            }
            x.samples.truncate(hop * g.num_time);
            let fs = x.sample_rate;
            let grid = TfGrid::from_hz(
                g.num_freq,
                g.num_time,
                g.f_min_hz.unwrap_or(0.0),
                g.f_max_hz.unwrap_or(fs / 2.0),
                x.duration(),
                fs,
            )?;
            let mut sig = PresetSignal::Real(x);
            if let Some(snr) = cfg.snr_db {
                sig = sig.with_noise(snr, cfg.seed)?;
            }
            let name = path.file_stem().map_or("wav".into(), |s| s.to_string_lossy().into_owned());
            Ok(Prepared { name, grid, signal: sig.analytic()?, reference: None })
        }
    }
}

/// Products of the estimation stage.
#[derive(Clone, Debug)]
pub struct RiftOutput {
    pub rift: Tfr,
    pub ipd: IpdField,
    pub tracks: Vec<Track>,
    pub spline: Tfr,
    pub residual_history: Vec<f64>,
}

/// Bank, weights, deconvolution and direction field; tracking when asked.
pub fn estimate(prep: &Prepared, cfg: &PipelineConfig, c: &Constellation, with_tracks: bool) -> Result<RiftOutput> {
    let grid = prep.grid;
    let bank = cfwt_bank(&prep.signal, c, &grid)?;
    let window = cfg.entropy.window.build(&grid)?;
    let weights = weight_field(&bank, cfg.entropy.alpha, &window)?;
    let cf = composites(&bank, &weights, c, cfg.deconv.row_blocks, cfg.deconv.col_blocks)?;
    drop(bank);
    let est = lr_tv_blockwise(&cf, cfg.deconv.options())?;
    let residual_history = est.residual_history.clone();
    let rift = est.into_tfr(grid, "rift")?;
    let ipd = extract_ipd(&weights, c)?;
    let tracks = if with_tracks { track(&rift.values, &ipd.smoothed, &cfg.tracker)? } else { Vec::new() };
    let spline = spline_rift(&tracks, &rift)?;
    Ok(RiftOutput { rift, ipd, tracks, spline, residual_history })
}

/// Everything produced by one configured run.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub prepared: Prepared,
    pub constellation: Constellation,
    pub cwt: Tfr,
    pub wvd: Tfr,
    pub output: RiftOutput,
    pub metrics: Vec<MetricsReport>,
}

impl Analysis {
    pub fn field(&self, m: Method) -> &Field {
        match m {
            Method::Cwt => &self.cwt.values,
            Method::Wvd => &self.wvd.values,
            Method::Rift => &self.output.rift.values,
            Method::SplineRift => &self.output.spline.values,
        }
    }
}

fn score(prep: &Prepared, snr: Option<f64>, fields: &[(Method, &Field)]) -> Result<Vec<MetricsReport>> {
    let Some(reference) = &prep.reference else { return Ok(Vec::new()) };
    // An empty representation (no tracks drawn) has no defined metrics.
    fields
        .iter()
        .filter(|(_, f)| f.as_slice().iter().any(|v| *v != 0.0))
        .map(|(m, f)| MetricsReport::evaluate(m.name(), snr, f, reference))
        .collect()
}

/// Runs every stage in memory.
pub fn analyze(cfg: &PipelineConfig) -> Result<Analysis> {
    let prepared = prepare(cfg)?;
    let constellation = build_constellation(cfg.constellation, &prepared.grid)?;
    let output = estimate(&prepared, cfg, &constellation, true)?;
    let cwt = cwt_baseline(&prepared.signal, &prepared.grid)?;
    let wvd = wvd(&prepared.signal, &prepared.grid)?;
    let mut a = Analysis { prepared, constellation, cwt, wvd, output, metrics: Vec::new() };
    if cfg.metrics {
        let fields: Vec<(Method, &Field)> = Method::ALL.iter().map(|&m| (m, a.field(m))).collect();
        a.metrics = score(&a.prepared, cfg.snr_db, &fields)?;
    }
    Ok(a)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub metrics: Vec<MetricsReport>,
    pub track_count: usize,
    pub seconds: f64,
}

/// Runs the pipeline and writes every artifact into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let a = analyze(cfg)?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let grid = a.prepared.grid;
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        fs::write(dir.join(name), bytes)?;
        files.push(name.to_string());
        Ok(())
    };
    put("rift.tfr", FieldFile::new(&grid, a.output.rift.values.clone()).to_bytes())?;
    put("spline_rift.tfr", FieldFile::new(&grid, a.output.spline.values.clone()).to_bytes())?;
    put("cwt.tfr", FieldFile::new(&grid, a.cwt.values.clone()).to_bytes())?;
    put("ipd.field", FieldFile::new(&grid, a.output.ipd.smoothed.clone()).to_bytes())?;
    let ipc_hz = a.output.ipd.ipc_physical(&grid).map(|v| v / (2.0 * std::f64::consts::PI));
    put("ipc.field", FieldFile::new(&grid, ipc_hz).to_bytes())?;
    let mut tracks = Vec::new();
    write_tracks_csv(&a.output.tracks, &grid, &mut tracks)?;
    put("tracks.csv", tracks)?;
    put("metrics.json", (reports_to_json(&a.metrics)? + "\n").into_bytes())?;
    let mut mcsv = Vec::new();
    write_reports_csv(&a.metrics, &mut mcsv)?;
    put("metrics.csv", mcsv)?;
    put("constellation.json", (a.constellation.to_json()? + "\n").into_bytes())?;
    put("config.resolved.json", (cfg.to_json()? + "\n").into_bytes())?;
    for (stem, f) in [
        ("rift", &a.output.rift.values),
        ("spline_rift", &a.output.spline.values),
        ("cwt", &a.cwt.values),
        ("ipd", &a.output.ipd.smoothed),
    ] {
        let info = write_render(dir, stem, f, 1.0)?;
        files.push(info.image);
        files.push(format!("{stem}.json"));
    }
    Ok(RunSummary {
        output_dir: dir.to_path_buf(),
        files,
        metrics: a.metrics,
        track_count: a.output.tracks.len(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// The swept quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Alpha(Vec<f64>),
    /// `None` is the clean signal.
    Snr(Vec<Option<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub signal: String,
    pub alpha: f64,
    pub snr_db: Option<f64>,
    pub method: String,
    pub bc: f64,
    pub js: f64,
    pub rer: f64,
    /// Min-max combined score within the row's comparison group.
    pub combined: Option<f64>,
    pub seconds: f64,
}

/// Noise seed of sweep cell `k`.
pub fn cell_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_cell(cfg: &PipelineConfig, methods: &[Method]) -> Result<(Vec<MetricsReport>, f64)> {
    let start = Instant::now();
    let prep = prepare(cfg)?;
    if prep.reference.is_none() {
        return Err(Error::InvalidConfig("sweeps need a preset signal for the reference".into()));
    }
    let mut owned: Vec<(Method, Field)> = Vec::new();
    let need_rift = methods.iter().any(|m| matches!(m, Method::Rift | Method::SplineRift));
    if need_rift {
        let c = build_constellation(cfg.constellation, &prep.grid)?;
        let out = estimate(&prep, cfg, &c, methods.contains(&Method::SplineRift))?;
        owned.push((Method::Rift, out.rift.values));
        owned.push((Method::SplineRift, out.spline.values));
    }
    for &m in methods {
        match m {
            Method::Cwt => owned.push((m, cwt_baseline(&prep.signal, &prep.grid)?.values)),
            Method::Wvd => owned.push((m, wvd(&prep.signal, &prep.grid)?.values)),
            _ => {}
        }
    }
    let fields: Vec<(Method, &Field)> = methods
        .iter()
        .map(|m| (*m, &owned.iter().find(|o| o.0 == *m).unwrap().1))
        .collect();
    Ok((score(&prep, cfg.snr_db, &fields)?, start.elapsed().as_secs_f64()))
}

/// Runs one cell per swept value, cells in parallel, rows in sweep order.
/// Scores are combined across the swept values for an alpha sweep and
/// across methods for an SNR sweep.
pub fn run_sweep(cfg: &PipelineConfig, axis: &SweepAxis, methods: &[Method]) -> Result<Vec<SweepRow>> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("a sweep needs at least one method".into()));
    }
    let cells: Vec<PipelineConfig> = match axis {
        SweepAxis::Alpha(v) => v
            .iter()
            .map(|&a| {
                let mut c = cfg.clone();
                c.entropy.alpha = a;
                c
            })
            .collect(),
        SweepAxis::Snr(v) => v
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let mut c = cfg.clone();
                c.snr_db = s;
                c.seed = cell_seed(cfg.seed, k);
                c
            })
            .collect(),
    };
    let results: Vec<(Vec<MetricsReport>, f64)> =
        cells.par_iter().map(|c| run_cell(c, methods)).collect::<Result<_>>()?;
    let name = match &cfg.signal {
        SignalSource::Preset(p) => p.name().to_string(),
        SignalSource::Wav(p) => p.display().to_string(),
    };
    let mut rows = Vec::new();
    for (k, (reports, secs)) in results.iter().enumerate() {
        for r in reports {
            rows.push(SweepRow {
                cell: k,
                signal: name.clone(),
                alpha: cells[k].entropy.alpha,
                snr_db: cells[k].snr_db,
                method: r.method.clone(),
                bc: r.bc,
                js: r.js,
                rer: r.rer,
                combined: None,
                seconds: *secs,
            });
        }
    }
    let groups: Vec<Vec<usize>> = match axis {
        SweepAxis::Alpha(_) => methods
            .iter()
            .map(|m| (0..rows.len()).filter(|&i| rows[i].method == m.name()).collect())
            .collect(),
        SweepAxis::Snr(_) => (0..cells.len()).map(|k| (0..rows.len()).filter(|&i| rows[i].cell == k).collect()).collect(),
    };
    for g in groups {
        let reports: Vec<MetricsReport> = g
            .iter()
            .map(|&i| MetricsReport {
                method: rows[i].method.clone(),
                snr_db: rows[i].snr_db,
                bc: rows[i].bc,
                js: rows[i].js,
                rer: rows[i].rer,
            })
            .collect();
        if let Ok(scores) = combined_score(&reports) {
            for (&i, s) in g.iter().zip(scores) {
                rows[i].combined = Some(s);
            }
        }
    }
    Ok(rows)
}

/// Writes the sweep table as CSV; timing is left out so reruns compare equal.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["cell", "signal", "alpha", "snr_db", "method", "bc", "js", "rer", "combined"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.cell.to_string(),
            r.signal.clone(),
            format!("{}", r.alpha),
            snr_label(r.snr_db),
            r.method.clone(),
            format!("{:.6}", r.bc),
            format!("{:.6}", r.js),
            format!("{:.6}", r.rer),
            r.combined.map_or(String::new(), |c| format!("{c:.6}")),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
