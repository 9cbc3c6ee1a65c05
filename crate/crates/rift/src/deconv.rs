//! Composite data and PSF fields, and positivity-preserving Lucy-Richardson
//! deconvolution with total-variation regularization.
//!
//! The spatially varying PSF is approximated per block by the block-mean
//! weights. Each block's convolution is evaluated by overlap-save: the block
//! plus a margin of the PSF half-support is transformed circularly, and only
//! the block interior, where no wrap-around reaches, is kept.

use serde::{Deserialize, Serialize};

use crate::entropy::WeightField;
use crate::error::{invalid, Error, Result};
use crate::fourier::{conv2d_linear, next_fast_len, ConvMode, RealFft2d, Spectrum2d};
use crate::grid::{Field, TfGrid, Tfr};
use crate::kernels::Constellation;
use crate::transforms::CfwtBank;

/// Self-convolved kernels are cropped to the box where they exceed this
/// fraction of their peak (four standard deviations of a Gaussian).
pub const KERNEL_CROP_LEVEL: f64 = 3.354_626_279_025_119e-4; // e^-8
/// Block PSFs are cropped to the box where they exceed this fraction of their peak.
pub const PSF_CROP_LEVEL: f64 = 1e-6;

/// Row and column split of the grid into blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub row_bounds: Vec<usize>,
    pub col_bounds: Vec<usize>,
}

impl BlockPartition {
    pub fn new(rows: usize, cols: usize, row_blocks: usize, col_blocks: usize) -> Result<Self> {
        if row_blocks == 0 || col_blocks == 0 || row_blocks > rows || col_blocks > cols {
            return Err(Error::InvalidConfig(format!(
                "cannot split {rows}x{cols} into {row_blocks}x{col_blocks} blocks"
            )));
        }
        let split = |n: usize, k: usize| (0..=k).map(|l| l * n / k).collect::<Vec<_>>();
        Ok(Self { row_bounds: split(rows, row_blocks), col_bounds: split(cols, col_blocks) })
    }

    pub fn row_blocks(&self) -> usize {
        self.row_bounds.len() - 1
    }

    pub fn col_blocks(&self) -> usize {
        self.col_bounds.len() - 1
    }

    pub fn len(&self) -> usize {
        self.row_blocks() * self.col_blocks()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(r0, c0, rows, cols)` of block `b`, row-major over blocks.
    pub fn block(&self, b: usize) -> (usize, usize, usize, usize) {
        let (l, h) = (b / self.col_blocks(), b % self.col_blocks());
        let (r0, r1) = (self.row_bounds[l], self.row_bounds[l + 1]);
        let (c0, c1) = (self.col_bounds[h], self.col_bounds[h + 1]);
        (r0, c0, r1 - r0, c1 - c0)
    }
}

/// Data field and block PSFs for the deconvolution.
#[derive(Clone, Debug)]
pub struct CompositeFields {
    pub phi_t: Field,
    pub blocks: BlockPartition,
    /// Centred PSF per block, odd-sized.
    pub psfs: Vec<Field>,
    /// Margin `(rows, cols)` added around each block; at least every PSF half-support.
    pub pad: (usize, usize),
}

/// Crops a centred odd-sized field to the symmetric box holding every value
/// at or above `level * max`.
pub fn crop_centered(f: &Field, level: f64) -> Field {
    let (hr, hc) = (f.rows() / 2, f.cols() / 2);
    let thresh = level * f.max();
    let (mut kr, mut kc) = (0, 0);
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            if f[(i, j)] >= thresh && f[(i, j)] > 0.0 {
                kr = kr.max(i.abs_diff(hr));
                kc = kc.max(j.abs_diff(hc));
            }
        }
    }
    f.window(hr - kr, hc - kc, 2 * kr + 1, 2 * kc + 1)
}

/// Adds `src` (centred) into `dst` (centred, at least as large), scaled.
fn add_centered(dst: &mut Field, src: &Field, factor: f64) {
    let r0 = dst.rows() / 2 - src.rows() / 2;
    let c0 = dst.cols() / 2 - src.cols() / 2;
    for i in 0..src.rows() {
        for j in 0..src.cols() {
            dst[(r0 + i, c0 + j)] += factor * src[(i, j)];
        }
    }
}

/// Self-convolution of a centred kernel raster, cropped at four standard deviations.
pub fn self_convolved(kernel: &Field) -> Result<Field> {
    let pair = conv2d_linear(kernel, kernel, ConvMode::Full)?.map(|v| v.max(0.0));
    Ok(crop_centered(&pair, KERNEL_CROP_LEVEL))
}

/// Builds `phi_t = sum_k W_k (phi_k * Pi_k)` with full per-pixel weights and
/// one PSF per block `sum_k <W_k> (Pi_k * Pi_k)` with block-mean weights,
/// where `W_k` is the total weight carried by entry `k`.
pub fn composites_from_parts(
    fields: &[Field],
    weights: &WeightField,
    rasters: &[Field],
    blocks: BlockPartition,
) -> Result<CompositeFields> {
    let n = fields.len();
    if n == 0 || weights.weights.len() != n || rasters.len() != n {
        return invalid("bank, weights and kernels must have one entry each");
    }
    let shape = fields[0].shape();
    if fields.iter().chain(&weights.weights).any(|f| f.shape() != shape) {
        return invalid("bank and weight fields differ in shape");
    }
    if *blocks.row_bounds.last().unwrap() != shape.0 || *blocks.col_bounds.last().unwrap() != shape.1 {
        return invalid("block partition does not cover the grid");
    }
    if rasters.iter().any(|r| r.rows() % 2 == 0 || r.cols() % 2 == 0) {
        return invalid("kernel rasters must be odd-sized and centred");
    }

    let max_r = rasters.iter().map(|r| r.rows()).max().unwrap();
    let max_c = rasters.iter().map(|r| r.cols()).max().unwrap();
    let plan = RealFft2d::new(next_fast_len(shape.0 + max_r - 1), next_fast_len(shape.1 + max_c - 1));
    let mut phi_t = Field::zeros(shape.0, shape.1);
    let mut pair = Vec::with_capacity(n);
    for k in 0..n {
        let r = &rasters[k];
        let smooth = plan
            .inverse(plan.forward(&fields[k]).product(&plan.forward_centered(r, r.rows() / 2, r.cols() / 2)))
            .window(0, 0, shape.0, shape.1);
        let m = weights.multiplicity[k] as f64;
        let w = weights.weights[k].as_slice();
        for ((out, s), wk) in phi_t.as_mut_slice().iter_mut().zip(smooth.as_slice()).zip(w) {
            *out += m * wk * s;
        }
        pair.push(self_convolved(r)?);
    }
    phi_t.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));

    let pr = pair.iter().map(|p| p.rows()).max().unwrap();
    let pc = pair.iter().map(|p| p.cols()).max().unwrap();
    let mut psfs = Vec::with_capacity(blocks.len());
    for b in 0..blocks.len() {
        let (r0, c0, rows, cols) = blocks.block(b);
        let mut psf = Field::zeros(pr, pc);
        for k in 0..n {
            let mut mean = 0.0;
            for i in r0..r0 + rows {
                mean += weights.weights[k].row(i)[c0..c0 + cols].iter().sum::<f64>();
            }
            mean *= weights.multiplicity[k] as f64 / (rows * cols) as f64;
            add_centered(&mut psf, &pair[k], mean);
        }
        psfs.push(crop_centered(&psf, PSF_CROP_LEVEL));
    }
    let pad = psfs.iter().fold((0, 0), |(a, b), p| (a.max(p.rows() / 2), b.max(p.cols() / 2)));
    Ok(CompositeFields { phi_t, blocks, psfs, pad })
}

/// Composite fields for a bank, its weights and constellation over
/// `row_blocks x col_blocks` blocks.
pub fn composites(
    bank: &CfwtBank,
    weights: &WeightField,
    c: &Constellation,
    row_blocks: usize,
    col_blocks: usize,
) -> Result<CompositeFields> {
    let fields: Vec<Field> = bank.fields.iter().map(|t| t.values.clone()).collect();
    let rasters: Vec<Field> = c.entries.iter().map(|e| e.raster.clone()).collect();
    let blocks = BlockPartition::new(bank.grid.num_freq, bank.grid.num_time, row_blocks, col_blocks)?;
    composites_from_parts(&fields, weights, &rasters, blocks)
}

/// Deconvolution settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrOptions {
    pub iterations: usize,
    /// Total-variation weight.
    pub lambda: f64,
}

impl Default for LrOptions {
    fn default() -> Self {
        LrOptions { iterations: 200, lambda: 0.002 }
    }
}

#[derive(Clone, Debug)]
pub struct RiftEstimate {
    pub values: Field,
    pub iterations_run: usize,
    /// `||x_k (*) psi - phi_t||^2` before each update.
    pub residual_history: Vec<f64>,
    /// Smallest value of each iterate, starting with the initial one.
    pub min_history: Vec<f64>,
}

impl RiftEstimate {
    pub fn into_tfr(self, grid: TfGrid, label: &str) -> Result<Tfr> {
        Tfr::new(grid, self.values, label)
    }
}

/// Per-block circular transforms for the spatially varying convolution.
struct BlockOperator {
    rows: usize,
    cols: usize,
    blocks: BlockPartition,
    pad: (usize, usize),
    plans: Vec<RealFft2d>,
    spectra: Vec<Spectrum2d>,
    masses: Vec<f64>,
}

impl BlockOperator {
    fn new(rows: usize, cols: usize, blocks: BlockPartition, psfs: &[Field], pad: (usize, usize)) -> Result<Self> {
        if psfs.len() != blocks.len() {
            return invalid("one PSF per block is required");
        }
        let mut plans = Vec::with_capacity(psfs.len());
        let mut spectra = Vec::with_capacity(psfs.len());
        let mut masses = Vec::with_capacity(psfs.len());
        for (b, psf) in psfs.iter().enumerate() {
            if psf.rows() % 2 == 0 || psf.cols() % 2 == 0 {
                return invalid("PSFs must be odd-sized and centred");
            }
            if psf.as_slice().iter().any(|&v| !(v >= 0.0)) || psf.sum() <= 0.0 {
                return invalid("PSFs must be non-negative with positive mass");
            }
            if psf.rows() / 2 > pad.0 || psf.cols() / 2 > pad.1 {
                return Err(Error::InvalidConfig(format!(
                    "block margin {}x{} is smaller than the PSF half-support {}x{}",
                    pad.0,
                    pad.1,
                    psf.rows() / 2,
                    psf.cols() / 2
                )));
            }
            let (_, _, br, bc) = blocks.block(b);
            let plan = RealFft2d::new(next_fast_len(br + 2 * pad.0), next_fast_len(bc + 2 * pad.1));
            spectra.push(plan.forward_centered(psf, psf.rows() / 2, psf.cols() / 2));
            masses.push(psf.sum());
            plans.push(plan);
        }
        Ok(Self { rows, cols, blocks, pad, plans, spectra, masses })
    }

    /// Copies the block plus margin out of `x`, zero outside the grid.
    fn extended(&self, x: &Field, b: usize, plan: &RealFft2d) -> Field {
        let (r0, c0, br, bc) = self.blocks.block(b);
        let mut out = Field::zeros(plan.rows(), plan.cols());
        let (pr, pc) = self.pad;
        for i in 0..br + 2 * pr {
            let gi = (r0 + i) as i64 - pr as i64;
            if gi < 0 || gi >= self.rows as i64 {
                continue;
            }
            for j in 0..bc + 2 * pc {
                let gj = (c0 + j) as i64 - pc as i64;
                if gj < 0 || gj >= self.cols as i64 {
                    continue;
                }
                out[(i, j)] = x[(gi as usize, gj as usize)];
            }
        }
        out
    }

    /// Each block's output pixels see only that block's PSF.
    fn forward(&self, x: &Field) -> Field {
        let mut out = Field::zeros(self.rows, self.cols);
        for b in 0..self.blocks.len() {
            let plan = &self.plans[b];
            let full = plan.inverse(plan.forward(&self.extended(x, b, plan)).product(&self.spectra[b]));
            let (r0, c0, br, bc) = self.blocks.block(b);
            for i in 0..br {
                for j in 0..bc {
                    out[(r0 + i, c0 + j)] = full[(i + self.pad.0, j + self.pad.1)];
                }
            }
        }
        out
    }

    /// Exact transpose of `forward`: each block's residual is correlated with
    /// that block's PSF and scattered over the block and its margin, scaled
    /// by the PSF mass.
    fn adjoint(&self, r: &Field) -> Field {
        let mut out = Field::zeros(self.rows, self.cols);
        let (pr, pc) = self.pad;
        for b in 0..self.blocks.len() {
            let plan = &self.plans[b];
            let (r0, c0, br, bc) = self.blocks.block(b);
            let mut src = Field::zeros(plan.rows(), plan.cols());
            for i in 0..br {
                src.row_mut(i + pr)[pc..pc + bc].copy_from_slice(&r.row(r0 + i)[c0..c0 + bc]);
            }
            let full = plan.inverse(plan.forward(&src).product_conj(&self.spectra[b]));
            let scale = 1.0 / self.masses[b];
            for i in 0..br + 2 * pr {
                let gi = (r0 + i) as i64 - pr as i64;
                if gi < 0 || gi >= self.rows as i64 {
                    continue;
                }
                for j in 0..bc + 2 * pc {
                    let gj = (c0 + j) as i64 - pc as i64;
                    if gj >= 0 && gj < self.cols as i64 {
                        out[(gi as usize, gj as usize)] += scale * full[(i, j)];
                    }
                }
            }
        }
        out
    }
}

/// `1 - lambda div(grad x / |grad x|)` with forward differences for the
/// gradient, backward for the divergence and zero flux across the border.
pub fn tv_divisor(x: &Field, lambda: f64) -> Field {
    let (rows, cols) = x.shape();
    let mut pu = Field::zeros(rows, cols);
    let mut pv = Field::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let du = if i + 1 < rows { x[(i + 1, j)] - x[(i, j)] } else { 0.0 };
            let dv = if j + 1 < cols { x[(i, j + 1)] - x[(i, j)] } else { 0.0 };
            let norm = (du * du + dv * dv + 1e-12).sqrt();
            pu[(i, j)] = du / norm;
            pv[(i, j)] = dv / norm;
        }
    }
    Field::from_fn(rows, cols, |i, j| {
        let a = pu[(i, j)] - if i > 0 { pu[(i - 1, j)] } else { 0.0 };
        let b = pv[(i, j)] - if j > 0 { pv[(i, j - 1)] } else { 0.0 };
        1.0 - lambda * (a + b)
    })
}

fn run_lr(phi_t: &Field, op: &BlockOperator, opts: LrOptions, init: Option<&Field>) -> Result<RiftEstimate> {
    if !(opts.lambda >= 0.0 && opts.lambda < 0.25) {
        return Err(Error::InvalidConfig(format!("TV weight {} must lie in [0, 0.25)", opts.lambda)));
    }
    // Round-off negatives from FFT convolution are clamped; anything larger is an error.
    let peak = phi_t.max();
    let slack = 1e-9 * peak.max(0.0);
    if phi_t.as_slice().iter().any(|&v| !(v >= -slack)) {
        return invalid("data field must be non-negative");
    }
    let clamped;
    let phi_t = if phi_t.min() < 0.0 {
        clamped = phi_t.map(|v| v.max(0.0));
        &clamped
    } else {
        phi_t
    };
    if peak <= 0.0 {
        return Ok(RiftEstimate {
            values: Field::zeros(phi_t.rows(), phi_t.cols()),
            iterations_run: 0,
            residual_history: Vec::new(),
            min_history: Vec::new(),
        });
    }
    let eps_div = 1e-12 * peak;
    let mut x = match init {
        Some(f) => {
            if f.shape() != phi_t.shape() || f.as_slice().iter().any(|&v| !(v >= 0.0)) {
                return invalid("initial estimate must be non-negative and match the data");
            }
            f.clone()
        }
        None => phi_t.clone(),
    };
    let mut residual_history = Vec::with_capacity(opts.iterations);
    let mut min_history = Vec::with_capacity(opts.iterations + 1);
    min_history.push(x.min());
    for _ in 0..opts.iterations {
        let blurred = op.forward(&x);
        let mut resid = 0.0;
        let ratio = Field::from_fn(phi_t.rows(), phi_t.cols(), |i, j| {
            let (d, m) = (phi_t[(i, j)], blurred[(i, j)]);
            resid += (m - d) * (m - d);
            d / m.max(eps_div)
        });
        residual_history.push(resid);
        let corr = op.adjoint(&ratio);
        if opts.lambda > 0.0 {
            let div = tv_divisor(&x, opts.lambda);
            for ((v, c), d) in x.as_mut_slice().iter_mut().zip(corr.as_slice()).zip(div.as_slice()) {
                *v = (*v * c / d).max(0.0);
            }
        } else {
            for (v, c) in x.as_mut_slice().iter_mut().zip(corr.as_slice()) {
                *v = (*v * c).max(0.0);
            }
        }
        min_history.push(x.min());
    }
    Ok(RiftEstimate { values: x, iterations_run: opts.iterations, residual_history, min_history })
}

/// LR-TV with one space-invariant PSF over the whole field.
pub fn lr_tv(phi_t: &Field, psf: &Field, opts: LrOptions, init: Option<&Field>) -> Result<RiftEstimate> {
    let blocks = BlockPartition::new(phi_t.rows(), phi_t.cols(), 1, 1)?;
    let pad = (psf.rows() / 2, psf.cols() / 2);
    let op = BlockOperator::new(phi_t.rows(), phi_t.cols(), blocks, std::slice::from_ref(psf), pad)?;
    run_lr(phi_t, &op, opts, init)
}

/// LR-TV with the per-block PSFs of `cf`.
pub fn lr_tv_blockwise(cf: &CompositeFields, opts: LrOptions) -> Result<RiftEstimate> {
    let (rows, cols) = cf.phi_t.shape();
    let op = BlockOperator::new(rows, cols, cf.blocks.clone(), &cf.psfs, cf.pad)?;
    run_lr(&cf.phi_t, &op, opts, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::weights_from_entropy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rows: usize, cols: usize, sr: f64, sc: f64) -> Field {
        let (hr, hc) = (rows / 2, cols / 2);
        let mut f = Field::from_fn(rows, cols, |i, j| {
            let a = (i as f64 - hr as f64) / sr;
            let b = (j as f64 - hc as f64) / sc;
            (-0.5 * (a * a + b * b)).exp()
        });
        let s = f.sum();
        f.scale(1.0 / s);
        f
    }

    fn random_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Field {
        Field::from_fn(rows, cols, |_, _| rng.gen_range(0.1..1.0))
    }

    fn uniform_weights(n: usize, rows: usize, cols: usize) -> WeightField {
        let hs = vec![Field::zeros(rows, cols); n];
        weights_from_entropy(hs, &vec![1; n], 0.0, Field::filled(1, 1, 1.0)).unwrap()
    }

    fn moments(f: &Field) -> (f64, f64, f64) {
        let (hr, hc) = ((f.rows() / 2) as f64, (f.cols() / 2) as f64);
        let m = f.sum();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for i in 0..f.rows() {
            for j in 0..f.cols() {
                let (u, v) = (i as f64 - hr, j as f64 - hc);
                a += f[(i, j)] * u * u;
                b += f[(i, j)] * u * v;
                c += f[(i, j)] * v * v;
            }
        }
        (a / m, b / m, c / m)
    }

    #[test]
    fn single_kernel_composites_are_plain_convolutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_field(&mut rng, 30, 40);
        let k = gaussian(9, 11, 1.2, 1.6);
        let w = uniform_weights(1, 30, 40);
        let blocks = BlockPartition::new(30, 40, 1, 1).unwrap();
        let cf = composites_from_parts(std::slice::from_ref(&phi), &w, std::slice::from_ref(&k), blocks).unwrap();
        let want = conv2d_linear(&phi, &k, ConvMode::Same).unwrap();
        assert!(cf.phi_t.max_abs_diff(&want) < 1e-12);
        let pp = self_convolved(&k).unwrap();
        assert!(cf.psfs[0].max_abs_diff(&crop_centered(&pp, PSF_CROP_LEVEL)) < 1e-15);
    }

    #[test]
    fn self_convolution_doubles_covariance() {
        // Rotated Gaussian with covariance [[4, 1.5], [1.5, 3]] pixels.
        let inv = {
            let det: f64 = 4.0 * 3.0 - 1.5 * 1.5;
            [[3.0 / det, -1.5 / det], [-1.5 / det, 4.0 / det]]
        };
        let k = Field::from_fn(31, 31, |i, j| {
            let (u, v) = (i as f64 - 15.0, j as f64 - 15.0);
            (-0.5 * (inv[0][0] * u * u + 2.0 * inv[0][1] * u * v + inv[1][1] * v * v)).exp()
        });
        let pp = conv2d_linear(&k, &k, ConvMode::Full).unwrap();
        let (a, b, c) = moments(&pp);
        assert!((a - 8.0).abs() < 1e-3 * 8.0);
        assert!((b - 3.0).abs() < 1e-3 * 3.0);
        assert!((c - 6.0).abs() < 1e-3 * 6.0);
    }

    #[test]
    fn block_psfs_carry_weighted_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fields: Vec<Field> = (0..3).map(|_| random_field(&mut rng, 24, 32)).collect();
        let hs: Vec<Field> = (0..3).map(|_| random_field(&mut rng, 24, 32)).collect();
        let w = weights_from_entropy(hs, &[1, 2, 2], 4.0, Field::filled(1, 1, 1.0)).unwrap();
        let rasters = vec![gaussian(7, 7, 1.0, 1.0), gaussian(11, 9, 2.0, 1.5), gaussian(9, 13, 1.3, 2.2)];
        let blocks = BlockPartition::new(24, 32, 2, 2).unwrap();
        let cf = composites_from_parts(&fields, &w, &rasters, blocks.clone()).unwrap();
        for b in 0..4 {
            let (r0, c0, br, bc) = blocks.block(b);
            let mut want = 0.0;
            for k in 0..3 {
                let mut mean = 0.0;
                for i in r0..r0 + br {
                    for j in c0..c0 + bc {
                        mean += w.aggregate(k, i, j);
                    }
                }
                want += mean / (br * bc) as f64 * self_convolved(&rasters[k]).unwrap().sum();
            }
            assert!((cf.psfs[b].sum() - want).abs() < 1e-3 * want);
        }
    }

    #[test]
    fn delta_psf_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = random_field(&mut rng, 16, 20);
        let out = lr_tv(&phi, &Field::filled(1, 1, 1.0), LrOptions { iterations: 1, lambda: 0.0 }, None).unwrap();
        assert!(out.values.max_abs_diff(&phi) < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let out = lr_tv(&Field::zeros(8, 8), &gaussian(5, 5, 1.0, 1.0), LrOptions::default(), None).unwrap();
        assert_eq!(out.values.max(), 0.0);
    }

    #[test]
    fn round_off_negatives_are_clamped() {
        let psf = gaussian(5, 5, 1.0, 1.0);
        let mut phi = Field::filled(8, 8, 1.0);
        phi[(2, 3)] = -1e-12;
        let out = lr_tv(&phi, &psf, LrOptions { iterations: 3, lambda: 0.0 }, None).unwrap();
        assert!(out.values.min() >= 0.0);
        phi[(2, 3)] = -1e-3;
        assert!(lr_tv(&phi, &psf, LrOptions::default(), None).is_err());
        phi[(2, 3)] = f64::NAN;
        assert!(lr_tv(&phi, &psf, LrOptions::default(), None).is_err());
    }

    #[test]
    fn plain_lr_conserves_flux() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi = random_field(&mut rng, 20, 24);
        let mut psf = gaussian(9, 7, 1.5, 1.1);
        psf.scale(0.8);
        let out = lr_tv(&phi, &psf, LrOptions { iterations: 5, lambda: 0.0 }, None).unwrap();
        let want = phi.sum() / psf.sum();
        assert!((out.values.sum() - want).abs() < 1e-6 * want);
    }

    #[test]
    fn tv_divisor_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_field(&mut rng, 15, 15);
        let lambda = 0.002;
        let d = tv_divisor(&x, lambda);
        assert!(d.min() >= 1.0 - 4.0 * lambda - 1e-15 && d.max() <= 1.0 + 4.0 * lambda + 1e-15);
    }

    #[test]
    fn uniform_psf_blocks_match_single_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = random_field(&mut rng, 40, 48);
        let psf = gaussian(9, 11, 1.5, 2.0);
        let opts = LrOptions { iterations: 20, lambda: 0.002 };
        let whole = lr_tv(&phi, &psf, opts, None).unwrap();
        let cf = CompositeFields {
            phi_t: phi.clone(),
            blocks: BlockPartition::new(40, 48, 2, 2).unwrap(),
            psfs: vec![psf.clone(); 4],
            pad: (4, 5),
        };
        let split = lr_tv_blockwise(&cf, opts).unwrap();
        assert!(split.values.max_abs_diff(&whole.values) < 1e-6 * whole.values.max());
        let one = CompositeFields { blocks: BlockPartition::new(40, 48, 1, 1).unwrap(), psfs: vec![psf.clone()], ..cf.clone() };
        assert_eq!(lr_tv_blockwise(&one, opts).unwrap().values, whole.values);
        let narrow = CompositeFields { pad: (3, 5), ..cf };
        assert!(matches!(lr_tv_blockwise(&narrow, opts), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn block_adjoint_is_the_transpose() {
        // <A x, y> = mass <x, A' y> when every block has its own PSF. Direct
        // sums over the PSF taps serve as the reference forward operator.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (rows, cols) = (20, 24);
        let blocks = BlockPartition::new(rows, cols, 2, 3).unwrap();
        let psfs: Vec<Field> = (0..6).map(|b| gaussian(7, 7, 0.8 + 0.2 * b as f64, 1.4 - 0.1 * b as f64)).collect();
        let op = BlockOperator::new(rows, cols, blocks.clone(), &psfs, (3, 3)).unwrap();
        let x = random_field(&mut rng, rows, cols);
        let y = random_field(&mut rng, rows, cols);
        let ax = op.forward(&x);
        for b in 0..blocks.len() {
            let (r0, c0, br, bc) = blocks.block(b);
            for i in r0..r0 + br {
                for j in c0..c0 + bc {
                    let mut want = 0.0;
                    for a in 0..7 {
                        for c in 0..7 {
                            let (si, sj) = (i as i64 + a as i64 - 3, j as i64 + c as i64 - 3);
                            if si >= 0 && sj >= 0 && (si as usize) < rows && (sj as usize) < cols {
                                want += psfs[b][(6 - a, 6 - c)] * x[(si as usize, sj as usize)];
                            }
                        }
                    }
                    assert!((ax[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
        let aty = op.adjoint(&y);
        let lhs: f64 = ax.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.as_slice().iter().zip(aty.as_slice()).map(|(a, b)| a * b).sum();
        // All test PSFs share unit mass.
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs());
    }

    #[test]
    fn constant_weights_match_fourier_solution() {
        // With constant weights the normal equations are solved exactly in the
        // Fourier domain; the forward operator applied to that solution gives
        // back the data field. Done circularly on one padded domain.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, cols) = (24, 28);
        let rasters = [gaussian(5, 5, 0.6, 0.8), gaussian(7, 5, 0.9, 0.5)];
        let fields: Vec<Field> = (0..2).map(|_| random_field(&mut rng, rows, cols)).collect();
        let plan = RealFft2d::new(rows, cols);
        let spec = |f: &Field| plan.forward_centered(f, f.rows() / 2, f.cols() / 2);
        let mut num = plan.forward(&fields[0]).product(&spec(&rasters[0]));
        num.add_scaled(&plan.forward(&fields[1]).product(&spec(&rasters[1])), 1.0);
        let mut den = spec(&rasters[0]).product(&spec(&rasters[0]));
        den.add_scaled(&spec(&rasters[1]).product(&spec(&rasters[1])), 1.0);
        let g_spec = num.ratio(&den);
        // Forward operator with weights 1/2: g * sum_k (1/2) Pi_k * Pi_k.
        let back = plan.inverse(g_spec.product(&den).scaled(0.5));
        let phi_t = plan.inverse(num.scaled(0.5));
        assert!(back.max_abs_diff(&phi_t) < 1e-6 * phi_t.max());
    }
}
