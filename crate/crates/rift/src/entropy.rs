//! Localized entropy of each bank field and the per-pixel inverse-perplexity
//! weights that pick the best-aligned kernel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fourier::{next_fast_len, RealFft2d, Spectrum2d};
use crate::grid::{Field, TfGrid};
use crate::transforms::CfwtBank;

/// Window mass below this fraction of the field's largest window mass is
/// treated as silence and given maximal entropy.
pub const SILENCE_FRACTION: f64 = 1e-10;

/// Gaussian truncated at 4 std per axis and normalized to unit sum.
pub fn gaussian_window(std_rows: f64, std_cols: f64) -> Result<Field> {
    if !(std_rows > 0.0 && std_cols > 0.0) {
        return invalid("entropy window std must be positive");
    }
    let hr = (4.0 * std_rows).ceil() as usize;
    let hc = (4.0 * std_cols).ceil() as usize;
    let mut w = Field::from_fn(2 * hr + 1, 2 * hc + 1, |i, j| {
        let a = (i as f64 - hr as f64) / std_rows;
        let b = (j as f64 - hc as f64) / std_cols;
        (-0.5 * (a * a + b * b)).exp()
    });
    let s = w.sum();
    w.scale(1.0 / s);
    Ok(w)
}

/// Localizing window used by the entropy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntropyWindow {
    /// Isotropic Gaussian, std in pixels.
    Gaussian { std_px: f64 },
    /// Axis-aligned Gaussian with separate row (frequency) and column (time) std.
    Anisotropic { std_rows_px: f64, std_cols_px: f64 },
    /// Isotropic Gaussian whose std is `factor` times the pixel std of the
    /// isotropic kernel on the grid.
    Relative { factor: f64 },
}

impl Default for EntropyWindow {
    fn default() -> Self {
        EntropyWindow::Gaussian { std_px: 3.0 }
    }
}

impl EntropyWindow {
    pub fn build(&self, grid: &TfGrid) -> Result<Field> {
        match *self {
            EntropyWindow::Gaussian { std_px } => gaussian_window(std_px, std_px),
            EntropyWindow::Anisotropic { std_rows_px, std_cols_px } => {
                gaussian_window(std_rows_px, std_cols_px)
            }
            EntropyWindow::Relative { factor } => {
                let s = factor * grid.pixel_scale() / 2f64.sqrt();
                gaussian_window(s, s)
            }
        }
    }
}

fn xlog2x(v: f64) -> f64 {
    if v > 0.0 {
        v * v.log2()
    } else {
        0.0
    }
}

/// Precomputed spectra for repeated entropy evaluation on one field shape.
pub struct EntropyPlan {
    rows: usize,
    cols: usize,
    half_r: usize,
    half_c: usize,
    fft: RealFft2d,
    w_spec: Spectrum2d,
    wlogw_spec: Spectrum2d,
    max_entropy: f64,
}

impl EntropyPlan {
    pub fn new(rows: usize, cols: usize, w: &Field) -> Result<Self> {
        if w.is_empty() || w.as_slice().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return invalid("entropy window must be finite and non-negative");
        }
        let support = w.as_slice().iter().filter(|&&v| v > 0.0).count();
        if support == 0 {
            return invalid("entropy window is empty");
        }
        let fft = RealFft2d::new(next_fast_len(rows + w.rows() - 1), next_fast_len(cols + w.cols() - 1));
        let w_spec = fft.forward(w);
        let wlogw_spec = fft.forward(&w.map(xlog2x));
        Ok(Self {
            rows,
            cols,
            half_r: w.rows() / 2,
            half_c: w.cols() / 2,
            fft,
            w_spec,
            wlogw_spec,
            max_entropy: (support as f64).log2(),
        })
    }

    /// Entropy of a uniform distribution over the window support.
    pub fn max_entropy(&self) -> f64 {
        self.max_entropy
    }

    fn same(&self, spec: Spectrum2d) -> Field {
        self.fft.inverse(spec).window(self.half_r, self.half_c, self.rows, self.cols)
    }

    /// `H = log2 Z - ([phi * w log2 w] + [phi log2 phi * w]) / Z`, `Z = phi * w`.
    pub fn entropy(&self, phi: &Field) -> Result<Field> {
        if phi.shape() != (self.rows, self.cols) {
            return invalid("field shape does not match the entropy plan");
        }
        if phi.as_slice().iter().any(|&v| v < 0.0) {
            return invalid("entropy needs a non-negative field");
        }
        let phi_spec = self.fft.forward(phi);
        let z = self.same(phi_spec.product(&self.w_spec));
        let a = self.same(phi_spec.product(&self.wlogw_spec));
        let b = self.same(self.fft.forward(&phi.map(xlog2x)).product(&self.w_spec));
        let floor = SILENCE_FRACTION * z.max();
        let hmax = self.max_entropy;
        let mut h = Field::zeros(self.rows, self.cols);
        for (k, out) in h.as_mut_slice().iter_mut().enumerate() {
            let zk = z.as_slice()[k];
            *out = if zk <= floor || zk <= 0.0 {
                hmax
            } else {
                (zk.log2() - (a.as_slice()[k] + b.as_slice()[k]) / zk).clamp(0.0, hmax)
            };
        }
        Ok(h)
    }
}

/// Local entropy of `phi` under window `w`.
pub fn local_entropy(phi: &Field, w: &Field) -> Result<Field> {
    EntropyPlan::new(phi.rows(), phi.cols(), w)?.entropy(phi)
}

/// Per-pixel kernel weights.
///
/// `weights[k]` is the normalized weight of a single constellation point of
/// entry `k`; entry `k` stands for `multiplicity[k]` identical points, so
/// `sum_k multiplicity[k] * weights[k] = 1` at every pixel.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub weights: Vec<Field>,
    pub multiplicity: Vec<usize>,
    pub alpha: f64,
    pub window: Field,
}

impl WeightField {
    /// Total weight carried by entry `k` at pixel `(i, j)`.
    pub fn aggregate(&self, k: usize, i: usize, j: usize) -> f64 {
        self.multiplicity[k] as f64 * self.weights[k][(i, j)]
    }

    /// Entry with the largest single-point weight at `(i, j)`; ties go to the lowest index.
    pub fn argmax(&self, i: usize, j: usize) -> usize {
        let mut best = 0;
        for k in 1..self.weights.len() {
            if self.weights[k][(i, j)] > self.weights[best][(i, j)] {
                best = k;
            }
        }
        best
    }
}

/// Normalizes the inverse perplexities `2^(-alpha H)` of the given entropy
/// fields. Each pixel is shifted by the extreme entropy first so the powers
/// stay in range.
pub fn weights_from_entropy(
    entropies: Vec<Field>,
    multiplicity: &[usize],
    alpha: f64,
    window: Field,
) -> Result<WeightField> {
    if entropies.is_empty() {
        return invalid("weight field needs at least one entry");
    }
    if multiplicity.len() != entropies.len() || multiplicity.contains(&0) {
        return invalid("one positive multiplicity per entry is required");
    }
    if !alpha.is_finite() {
        return invalid("alpha must be finite");
    }
    let shape = entropies[0].shape();
    if entropies.iter().any(|h| h.shape() != shape) {
        return invalid("entropy fields differ in shape");
    }
    let mut weights = entropies;
    let n = shape.0 * shape.1;
    for p in 0..n {
        let reference = weights.iter().map(|h| h.as_slice()[p]).fold(
            if alpha >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            |acc, v| if alpha >= 0.0 { acc.min(v) } else { acc.max(v) },
        );
        let mut total = 0.0;
        for (h, &m) in weights.iter_mut().zip(multiplicity) {
            let v = &mut h.as_mut_slice()[p];
            *v = (-alpha * (*v - reference)).exp2();
            total += m as f64 * *v;
        }
        for h in weights.iter_mut() {
            h.as_mut_slice()[p] /= total;
        }
    }
    Ok(WeightField { weights, multiplicity: multiplicity.to_vec(), alpha, window })
}

/// Entropy fields of every bank entry.
pub fn bank_entropies(bank: &CfwtBank, w: &Field) -> Result<Vec<Field>> {
    let plan = EntropyPlan::new(bank.grid.num_freq, bank.grid.num_time, w)?;
    bank.fields.iter().map(|t| plan.entropy(&t.values)).collect()
}

/// Inverse-perplexity weights for a bank.
pub fn weight_field(bank: &CfwtBank, alpha: f64, w: &Field) -> Result<WeightField> {
    let entropies = bank_entropies(bank, w)?;
    weights_from_entropy(entropies, &bank.multiplicity, alpha, w.clone())
}
