//! `rift` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure
//! (including unreadable or malformed input files).
//! `RIFT_THREADS` sets the worker pool size (default: all cores).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rift::config::{PipelineConfig, SignalSource};
use rift::io::{write_render, FieldFile};
use rift::metrics::{reports_to_json, write_reports_csv, MetricsReport};
use rift::pipeline::{run_pipeline, run_sweep, write_sweep_csv, Method, SweepAxis};
use rift::signals::{rasterize_itfr, trajectories, Preset};
use rift::{Error, TfGrid};

const THREADS_VAR: &str = "RIFT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "rift", version, about = "Ideal time-frequency estimation from a constellation of fractional wavelets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write every artifact.
    Run(RunArgs),
    /// Score methods over a list of alpha or SNR values.
    Sweep(SweepArgs),
    /// Score a stored field against a preset's reference.
    Metrics(MetricsArgs),
    /// Render a stored field as a 16-bit PGM with a JSON sidecar.
    Render(RenderArgs),
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in signal: x1, x4, x5, x6 or z3.
    #[arg(long, conflicts_with = "wav")]
    preset: Option<Preset>,
    /// Mono or stereo PCM WAV input.
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Noise level in dB; `inf` for the clean signal.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Lucy-Richardson iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Total-variation weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Frequency rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Time columns.
    #[arg(long)]
    cols: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "snrs", required_unless_present = "snrs")]
    alphas: Vec<f64>,
    /// Comma-separated SNRs in dB; `inf` for the clean signal.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snrs: Vec<String>,
    /// Comma-separated methods: cwt, wvd, rift, spline_rift.
    #[arg(long, value_delimiter = ',', default_value = "cwt,wvd,rift,spline_rift")]
    methods: Vec<String>,
    /// Summary CSV path.
    #[arg(long, short, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Field file written by `rift run`.
    field: PathBuf,
    /// Preset the field was computed from.
    #[arg(long)]
    preset: Preset,
    /// Blur of the reference tube, pixels.
    #[arg(long, default_value_t = 1.5)]
    tube_sigma: f64,
    /// Label for the report row.
    #[arg(long, default_value = "field")]
    method: String,
    /// Print CSV instead of JSON.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Field file written by `rift run`.
    field: PathBuf,
    /// Output directory.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
    /// Display gamma; visual only.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

fn parse_snr(s: &str) -> Result<Option<f64>, Error> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::InvalidConfig(format!("bad SNR '{s}'")))
}

fn build_config(a: &ConfigArgs) -> Result<PipelineConfig, Error> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            PipelineConfig::from_json(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), strip_prefix(&e))))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(p) = a.preset {
        cfg.signal = SignalSource::Preset(p);
    }
    if let Some(w) = &a.wav {
        cfg.signal = SignalSource::Wav(w.clone());
        cfg.metrics = false;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = &a.snr {
        cfg.snr_db = parse_snr(s)?;
    }
    if let Some(v) = a.alpha {
        cfg.entropy.alpha = v;
    }
    if let Some(v) = a.iterations {
        cfg.deconv.iterations = v;
    }
    if let Some(v) = a.lambda {
        cfg.deconv.lambda = v;
    }
    if let Some(v) = a.rows {
        cfg.grid.num_freq = v;
    }
    if let Some(v) = a.cols {
        cfg.grid.num_time = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::InvalidConfig(m) => m.clone(),
        other => other.to_string(),
    }
}

fn cmd_run(a: &RunArgs) -> Result<(), Error> {
    let mut cfg = build_config(&a.cfg)?;
    if let Some(out) = &a.out {
        cfg.output_dir = out.clone();
    }
    let s = run_pipeline(&cfg)?;
    println!("wrote {} files to {} in {:.1} s", s.files.len(), s.output_dir.display(), s.seconds);
    println!("tracks: {}", s.track_count);
    for m in &s.metrics {
        println!("{:<12} bc {:.4}  js {:.4}  rer {:.4}", m.method, m.bc, m.js, m.rer);
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Error> {
    let cfg = build_config(&a.cfg)?;
    let axis = if a.alphas.is_empty() {
        SweepAxis::Snr(a.snrs.iter().map(|s| parse_snr(s)).collect::<Result<_, _>>()?)
    } else {
        SweepAxis::Alpha(a.alphas.clone())
    };
    let methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let rows = run_sweep(&cfg, &axis, &methods)?;
    write_sweep_csv(&rows, &a.out)?;
    for r in &rows {
        let combined = r.combined.map_or("-".to_string(), |c| format!("{c:.3}"));
        println!(
            "alpha {:>6} snr {:>5} {:<12} bc {:.4} js {:.4} rer {:.4} combined {combined}",
            r.alpha,
            rift::metrics::snr_label(r.snr_db),
            r.method,
            r.bc,
            r.js,
            r.rer
        );
    }
    println!("summary: {}", a.out.display());
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> Result<(), Error> {
    let file = FieldFile::read(&a.field)?;
    let p = a.preset;
    let (rows, cols) = file.values.shape();
    let grid = TfGrid::from_hz(rows, cols, file.f_min_hz, file.f_max_hz, p.duration(), p.sample_rate())?;
    if (grid.delta_t - file.delta_t).abs() > 1e-9 * file.delta_t.abs().max(1e-12) {
        return Err(Error::InvalidConfig(format!(
            "field time step {} s does not match preset {} ({} s)",
            file.delta_t,
            p.name(),
            grid.delta_t
        )));
    }
    let reference = rasterize_itfr(&trajectories(&p.components(), &grid), &grid, a.tube_sigma)?;
    let report = MetricsReport::evaluate(&a.method, None, &file.values, &reference)?;
    if a.csv {
        write_reports_csv(&[report], std::io::stdout().lock())?;
    } else {
        println!("{}", reports_to_json(&[report])?);
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<(), Error> {
    let file = FieldFile::read(&a.field)?;
    fs::create_dir_all(&a.out)?;
    let stem = a.field.file_stem().map_or("field".into(), |s| s.to_string_lossy().into_owned());
    let info = write_render(Path::new(&a.out), &stem, &file.values, a.gamma)?;
    println!("{}", a.out.join(&info.image).display());
    Ok(())
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Render(a) => cmd_render(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rift: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
