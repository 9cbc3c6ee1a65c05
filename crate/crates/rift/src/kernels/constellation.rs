//! The `(sigma, theta)` grid of kernels used by the analysis bank.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mapping::{phi_of, kappa_max, Branch, ImplementedKernel, KernelSpec};
use super::quantile::inverse_normal_cdf;
use super::window::{cohen_kernel, make_window, window_half_len, Window};
use crate::error::{Error, Result};
use crate::grid::{Field, TfGrid};

/// Number of angle steps per half-turn for a ring of width `sigma`:
/// `max(min, round(per_sigma * max(sigma, 1/sigma)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MRule {
    pub min: usize,
    pub per_sigma: f64,
}

impl Default for MRule {
    fn default() -> Self {
        MRule { min: 8, per_sigma: 8.0 }
    }
}

impl MRule {
    pub fn count(&self, sigma: f64) -> usize {
        let m = (self.per_sigma * sigma.max(1.0 / sigma)).round();
        self.min.max(m.max(0.0) as usize)
    }
}

/// Log-normally spaced widths, symmetric about 1 in the log domain.
pub fn sigma_grid(sigma_l: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || count.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("sigma count must be odd, got {count}")));
    }
    if !(sigma_l > 0.0 && sigma_l.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma spread must be positive, got {sigma_l}")));
    }
    let mid = count.div_ceil(2);
    let mut out = vec![1.0; count];
    for n in mid + 1..=count {
        let s = (sigma_l * inverse_normal_cdf(n as f64 / (count as f64 + 1.0))).exp();
        out[n - 1] = s;
        out[count - n] = 1.0 / s;
    }
    Ok(out)
}

/// Uniform angle grid `pi * ((m - 1) / (2M) - 1/2)` for `m = 1..=2M`, wrapped
/// into `(-pi/2, pi/2]`.
pub fn theta_grid(m_count: usize) -> Vec<f64> {
    (1..=2 * m_count)
        .map(|m| super::wrap_half_turn(PI * ((m - 1) as f64 / (2 * m_count) as f64 - 0.5)))
        .collect()
}

/// One distinct kernel of the constellation.
#[derive(Clone, Debug)]
pub struct ConstellationEntry {
    /// Ring index, 1-based; always in the upper half.
    pub n: usize,
    /// Angle index within the ring, 1-based.
    pub m: usize,
    pub kernel: ImplementedKernel,
    /// How many `(n, m)` grid points this kernel stands for.
    pub multiplicity: usize,
    /// The mirrored grid point `(n', m')` in the lower half, if any.
    pub mirror: Option<(usize, usize)>,
    pub raster: Field,
    pub window: Window,
}

impl ConstellationEntry {
    pub fn spec(&self) -> KernelSpec {
        self.kernel.spec
    }
}

/// Constellation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstellationConfig {
    pub sigma_count: usize,
    pub sigma_spread: f64,
    pub angles: MRule,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        ConstellationConfig { sigma_count: 7, sigma_spread: 1.0, angles: MRule::default() }
    }
}

#[derive(Clone, Debug)]
pub struct Constellation {
    pub config: ConstellationConfig,
    pub sigmas: Vec<f64>,
    pub sigma_iso: f64,
    pub entries: Vec<ConstellationEntry>,
}

/// Row of the JSON dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub theta: f64,
    pub sigma0: f64,
    pub kappa: f64,
    pub branch: Branch,
    pub multiplicity: usize,
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the isotropic entry.
    pub fn isotropic_index(&self) -> Option<usize> {
        self.entries.iter().position(|e| e.kernel.branch == Branch::Isotropic)
    }

    pub fn summaries(&self) -> Vec<EntrySummary> {
        self.entries
            .iter()
            .map(|e| EntrySummary {
                n: e.n,
                m: e.m,
                sigma: e.kernel.spec.sigma,
                theta: e.kernel.spec.theta,
                sigma0: e.kernel.sigma0,
                kappa: e.kernel.kappa,
                branch: e.kernel.branch,
                multiplicity: e.multiplicity,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summaries())
            .map_err(|e| Error::InvalidInput(format!("constellation dump: {e}")))
    }
}

/// Builds one entry from an intended spec on `grid`.
pub fn build_entry(
    n: usize,
    m: usize,
    spec: KernelSpec,
    multiplicity: usize,
    mirror: Option<(usize, usize)>,
    grid: &TfGrid,
) -> Result<ConstellationEntry> {
    let kernel = ImplementedKernel::realize(spec)?;
    let ts = 1.0 / grid.sample_rate;
    let sigma_iso = grid.sigma_iso();
    let window = make_window(&kernel, sigma_iso, ts, window_half_len(&kernel, sigma_iso, ts))?;
    Ok(ConstellationEntry { n, m, kernel, multiplicity, mirror, raster: cohen_kernel(&kernel, grid), window })
}

/// Checks that the principal-axis angle is strictly monotone in the chirp
/// angle over the valid range, which the root search relies on.
fn check_monotone(sigma: f64) -> Result<()> {
    if (sigma - 1.0).abs() < 1e-12 {
        return Ok(());
    }
    let km = kappa_max(sigma);
    let dir = (sigma - 1.0).signum();
    let steps = 256;
    let mut prev = phi_of(sigma, -km)?;
    for k in 1..=steps {
        let kappa = -km + 2.0 * km * k as f64 / steps as f64;
        let cur = phi_of(sigma, kappa)?;
        if dir * (cur - prev) <= 0.0 {
            return Err(Error::Domain(format!("principal angle not monotone for sigma {sigma}")));
        }
        prev = cur;
    }
    Ok(())
}

/// Builds the constellation on `grid`.
///
/// Only rings at or above the middle are materialized. A kernel of width
/// `1/sigma` rotated a quarter turn equals the width-`sigma` kernel, so each
/// lower ring duplicates an upper one and its entries carry multiplicity 2.
/// The middle ring is isotropic; all its angles give the same kernel, which
/// is kept once.
pub fn build_constellation(config: ConstellationConfig, grid: &TfGrid) -> Result<Constellation> {
    if config.angles.min == 0 {
        return Err(Error::InvalidInput("angle count must be at least 1".into()));
    }
    let sigmas = sigma_grid(config.sigma_spread, config.sigma_count)?;
    let count = config.sigma_count;
    let mid = count.div_ceil(2);
    let mut entries = Vec::new();
    for n in mid..=count {
        let sigma = sigmas[n - 1];
        check_monotone(sigma)?;
        if n == mid {
            entries.push(build_entry(n, 1, KernelSpec::new(1.0, 0.0)?, 1, None, grid)?);
            continue;
        }
        let m_count = config.angles.count(sigma);
        for (k, theta) in theta_grid(m_count).into_iter().enumerate() {
            let m = k + 1;
            let mirror_m = (m - 1 + m_count) % (2 * m_count) + 1;
            let spec = KernelSpec::new(sigma, theta)?;
            entries.push(build_entry(n, m, spec, 2, Some((count + 1 - n, mirror_m)), grid)?);
        }
    }
    Ok(Constellation { config, sigmas, sigma_iso: grid.sigma_iso(), entries })
}
