//! Distribution-overlap metrics against a reference ITFR and the combined
//! score used to rank methods or settings.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::signals::ReferenceItfr;

fn normalized(f: &Field, what: &str) -> Result<Vec<f64>> {
    let total: f64 = f.as_slice().iter().map(|v| v.abs()).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::UndefinedMetric(format!("{what} has no mass")));
    }
    Ok(f.as_slice().iter().map(|v| v.abs() / total).collect())
}

fn pair(r: &Field, c: &Field) -> Result<(Vec<f64>, Vec<f64>)> {
    if r.shape() != c.shape() {
        return Err(Error::InvalidInput("representation and reference differ in shape".into()));
    }
    Ok((normalized(r, "representation")?, normalized(c, "reference")?))
}

/// `sum sqrt(P Q)`.
pub fn bhattacharyya(r: &Field, c: &Field) -> Result<f64> {
    let (p, q) = pair(r, c)?;
    Ok(p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().min(1.0))
}

/// `KL(p | (p + q) / 2)`, written so subnormal masses cannot overflow the ratio.
fn kl_to_mix(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (2.0 * a / (a + b)).log2()).sum()
}

/// Base-2 Jensen-Shannon divergence.
pub fn jensen_shannon(r: &Field, c: &Field) -> Result<f64> {
    let (p, q) = pair(r, c)?;
    Ok((0.5 * kl_to_mix(&p, &q) + 0.5 * kl_to_mix(&q, &p)).clamp(0.0, 1.0))
}

/// `sum P W` with tube weights `W = C / max C`.
pub fn ridge_energy_ratio(r: &Field, tube_weights: &Field) -> Result<f64> {
    if r.shape() != tube_weights.shape() {
        return Err(Error::InvalidInput("representation and tube differ in shape".into()));
    }
    if !(tube_weights.max() > 0.0) {
        return Err(Error::UndefinedMetric("tube weights are empty".into()));
    }
    let p = normalized(r, "representation")?;
    Ok(p.iter().zip(tube_weights.as_slice()).map(|(a, w)| a * w).sum::<f64>().clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    /// `None` for the noise-free signal.
    pub snr_db: Option<f64>,
    pub bc: f64,
    pub js: f64,
    pub rer: f64,
}

impl MetricsReport {
    pub fn evaluate(method: &str, snr_db: Option<f64>, r: &Field, reference: &ReferenceItfr) -> Result<Self> {
        let c = &reference.tfr.values;
        Ok(MetricsReport {
            method: method.to_string(),
            snr_db,
            bc: bhattacharyya(r, c)?,
            js: jensen_shannon(r, c)?,
            rer: ridge_energy_ratio(r, &reference.tube_weights)?,
        })
    }
}

/// Formats an SNR for tables, `inf` for the noise-free case.
pub fn snr_label(snr_db: Option<f64>) -> String {
    snr_db.map_or_else(|| "inf".to_string(), |s| format!("{s}"))
}

/// Min-max normalizes each metric across the entries (JS reversed so that
/// higher is better) and averages the three. A metric with no spread
/// contributes 0.5 to every entry.
pub fn combined_score(reports: &[MetricsReport]) -> Result<Vec<f64>> {
    if reports.len() < 2 {
        return Err(Error::UndefinedMetric("combined score needs at least two entries".into()));
    }
    let scale = |vals: Vec<f64>, higher_better: bool| -> Vec<f64> {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        vals.iter()
            .map(|v| {
                if range <= 0.0 {
                    0.5
                } else if higher_better {
                    (v - lo) / range
                } else {
                    (hi - v) / range
                }
            })
            .collect()
    };
    let bc = scale(reports.iter().map(|r| r.bc).collect(), true);
    let js = scale(reports.iter().map(|r| r.js).collect(), false);
    let rer = scale(reports.iter().map(|r| r.rer).collect(), true);
    Ok((0..reports.len()).map(|k| (bc[k] + js[k] + rer[k]) / 3.0).collect())
}

/// Writes `method,snr_db,bc,js,rer` rows.
pub fn write_reports_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "snr_db", "bc", "js", "rer"]).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            snr_label(r.snr_db),
            format!("{:.6}", r.bc),
            format!("{:.6}", r.js),
            format!("{:.6}", r.rer),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn reports_to_json(reports: &[MetricsReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::InvalidInput(format!("metrics dump: {e}")))
}
