//! FFT plumbing: padded linear convolutions, a planned real 2-D transform and
//! the analytic signal.
//!
//! Forward transforms use `e^{-jωt}`. Inverse transforms are normalized so a
//! forward/inverse round trip is the identity.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::grid::{AnalyticSignal, Field, RealSignal};

/// Smallest `2^a 3^b 5^c` that is at least `n`.
pub fn next_fast_len(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut best = n.next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Full linear convolution of two complex sequences, length `a.len() + b.len() - 1`.
pub fn conv1d_linear(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.is_empty() || b.is_empty() {
        return invalid("convolution operands must be nonempty");
    }
    let out_len = a.len() + b.len() - 1;
    let n = next_fast_len(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    let mut fb = vec![Complex64::new(0.0, 0.0); n];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let scale = 1.0 / n as f64;
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y * scale;
    }
    inv.process(&mut fa);
    fa.truncate(out_len);
    Ok(fa)
}

/// Output extent of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvMode {
    /// Same shape as the first operand, kernel centered at `(rows/2, cols/2)`.
    Same,
    /// Every overlapping position.
    Full,
}

/// Linear 2-D convolution of real arrays.
pub fn conv2d_linear(a: &Field, k: &Field, mode: ConvMode) -> Result<Field> {
    if a.is_empty() || k.is_empty() {
        return invalid("convolution operands must be nonempty");
    }
    let full_rows = a.rows() + k.rows() - 1;
    let full_cols = a.cols() + k.cols() - 1;
    let plan = RealFft2d::new(next_fast_len(full_rows), next_fast_len(full_cols));
    let sa = plan.forward(a);
    let sk = plan.forward(k);
    let out = plan.inverse(sa.product(&sk));
    Ok(match mode {
        ConvMode::Full => out.window(0, 0, full_rows, full_cols),
        ConvMode::Same => out.window(k.rows() / 2, k.cols() / 2, a.rows(), a.cols()),
    })
}

/// Half spectrum of a real 2-D array, stored column-major (`cols/2+1` runs of `rows`).
#[derive(Clone, Debug)]
pub struct Spectrum2d {
    data: Vec<Complex64>,
}

impl Spectrum2d {
    pub fn product(&self, other: &Spectrum2d) -> Spectrum2d {
        Spectrum2d { data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect() }
    }

    /// Product with the conjugate of `other`: correlation instead of convolution.
    pub fn product_conj(&self, other: &Spectrum2d) -> Spectrum2d {
        Spectrum2d { data: self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).collect() }
    }

    /// Elementwise quotient `self / other`.
    pub fn ratio(&self, other: &Spectrum2d) -> Spectrum2d {
        Spectrum2d { data: self.data.iter().zip(&other.data).map(|(a, b)| a / b).collect() }
    }

    pub fn scaled(&self, factor: f64) -> Spectrum2d {
        Spectrum2d { data: self.data.iter().map(|a| a * factor).collect() }
    }

    pub fn add_scaled(&mut self, other: &Spectrum2d, factor: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
    }
}

/// Planned real-input 2-D FFT on a fixed padded size.
pub struct RealFft2d {
    rows: usize,
    cols: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl RealFft2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        Self {
            rows,
            cols,
            half: cols / 2 + 1,
            r2c: real.plan_fft_forward(cols),
            c2r: real.plan_fft_inverse(cols),
            col_fwd: cplx.plan_fft_forward(rows),
            col_inv: cplx.plan_fft_inverse(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Transform of `src` zero-padded at the top-left corner of the plan size.
    pub fn forward(&self, src: &Field) -> Spectrum2d {
        self.forward_at(src, 0, 0)
    }

    /// Transform of `src` placed with its `(r0, c0)` element at the origin,
    /// wrapping negative offsets circularly. Used for centered kernels.
    pub fn forward_centered(&self, src: &Field, r0: usize, c0: usize) -> Spectrum2d {
        assert!(src.rows() <= self.rows && src.cols() <= self.cols);
        let mut padded = Field::zeros(self.rows, self.cols);
        for i in 0..src.rows() {
            let pi = (i + self.rows - r0 % self.rows) % self.rows;
            for j in 0..src.cols() {
                let pj = (j + self.cols - c0 % self.cols) % self.cols;
                padded[(pi, pj)] += src[(i, j)];
            }
        }
        self.forward_padded(padded.as_slice())
    }

    /// Transform of `src` with its top-left element at `(r0, c0)`.
    pub fn forward_at(&self, src: &Field, r0: usize, c0: usize) -> Spectrum2d {
        assert!(r0 + src.rows() <= self.rows && c0 + src.cols() <= self.cols);
        let mut padded = vec![0.0; self.rows * self.cols];
        for i in 0..src.rows() {
            let start = (r0 + i) * self.cols + c0;
            padded[start..start + src.cols()].copy_from_slice(src.row(i));
        }
        self.forward_padded(&padded)
    }

    fn forward_padded(&self, padded: &[f64]) -> Spectrum2d {
        let (rows, cols, half) = (self.rows, self.cols, self.half);
        let mut line = vec![0.0; cols];
        let mut line_out = vec![Complex64::new(0.0, 0.0); half];
        let mut scratch = self.r2c.make_scratch_vec();
        let mut data = vec![Complex64::new(0.0, 0.0); rows * half];
        for i in 0..rows {
            line.copy_from_slice(&padded[i * cols..(i + 1) * cols]);
            self.r2c
                .process_with_scratch(&mut line, &mut line_out, &mut scratch)
                .expect("buffer sizes match the plan");
            for (k, v) in line_out.iter().enumerate() {
                data[k * rows + i] = *v;
            }
        }
        let mut col_scratch =
            vec![Complex64::new(0.0, 0.0); self.col_fwd.get_inplace_scratch_len()];
        self.col_fwd.process_with_scratch(&mut data, &mut col_scratch);
        Spectrum2d { data }
    }

    /// Inverse transform back to a `rows x cols` real field.
    pub fn inverse(&self, mut spec: Spectrum2d) -> Field {
        let (rows, cols, half) = (self.rows, self.cols, self.half);
        let mut col_scratch =
            vec![Complex64::new(0.0, 0.0); self.col_inv.get_inplace_scratch_len()];
        self.col_inv.process_with_scratch(&mut spec.data, &mut col_scratch);
        let mut line_in = vec![Complex64::new(0.0, 0.0); half];
        let mut scratch = self.c2r.make_scratch_vec();
        let mut out = Field::zeros(rows, cols);
        let scale = 1.0 / (rows * cols) as f64;
        for i in 0..rows {
            for (k, v) in line_in.iter_mut().enumerate() {
                *v = spec.data[k * rows + i];
            }
            // Rounding leaves tiny imaginary parts on the self-conjugate bins.
            line_in[0].im = 0.0;
            if cols % 2 == 0 {
                line_in[half - 1].im = 0.0;
            }
            let row = out.row_mut(i);
            self.c2r
                .process_with_scratch(&mut line_in, row, &mut scratch)
                .expect("buffer sizes match the plan");
            row.iter_mut().for_each(|v| *v *= scale);
        }
        out
    }
}

/// Analytic signal by one-sided spectral doubling at the signal length.
///
/// The real part is copied from the input so it matches exactly.
pub fn analytic_signal(x: &RealSignal) -> Result<AnalyticSignal> {
    let n = x.samples.len();
    if n < 2 {
        return invalid("analytic signal needs at least two samples");
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let nyquist = if n.is_multiple_of(2) { Some(n / 2) } else { None };
    for (k, v) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || Some(k) == nyquist {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= gain / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    for (z, &re) in buf.iter_mut().zip(&x.samples) {
        z.re = re;
    }
    Ok(AnalyticSignal { samples: buf, sample_rate: x.sample_rate })
}

/// Sampled continuous Fourier transform `X(ω) = dt/√(2π) Σ x e^{-jωt}` on the
/// FFT frequency lattice, returned with its spacing in rad/s.
///
/// With this scaling `Σ|x|² dt = Σ|X|² dω`.
pub fn continuous_spectrum(x: &[Complex64], dt: f64) -> (Vec<Complex64>, f64) {
    let n = x.len();
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = dt / (2.0 * PI).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    (buf, 2.0 * PI / (n as f64 * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn direct_conv1d(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn direct_conv2d_full(a: &Field, k: &Field) -> Field {
        let mut out = Field::zeros(a.rows() + k.rows() - 1, a.cols() + k.cols() - 1);
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                for u in 0..k.rows() {
                    for v in 0..k.cols() {
                        out[(i + u, j + v)] += a[(i, j)] * k[(u, v)];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn fast_len_is_smooth_and_minimal() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(11), 12);
        assert_eq!(next_fast_len(1025), 1080);
        for n in 1..500 {
            let m = next_fast_len(n);
            assert!(m >= n);
            let mut r = m;
            for p in [2, 3, 5] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            assert_eq!(r, 1, "{m} is not 5-smooth");
        }
    }

    #[test]
    fn conv1d_small_cases() {
        let out = conv1d_linear(&[c(1.0), c(0.0), c(0.0)], &[c(1.0), c(2.0), c(3.0)]).unwrap();
        let want = [1.0, 2.0, 3.0, 0.0, 0.0];
        for (o, w) in out.iter().zip(want) {
            assert!((o - c(w)).norm() < 1e-12);
        }
        let out = conv1d_linear(&[c(1.0), c(1.0)], &[c(1.0), c(1.0)]).unwrap();
        assert_eq!(out.len(), 3);
        assert!((out[1] - c(2.0)).norm() < 1e-12);
        assert!(conv1d_linear(&[], &[c(1.0)]).is_err());
    }

    #[test]
    fn conv1d_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<Complex64> =
            (0..17).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let b: Vec<Complex64> =
            (0..23).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let fast = conv1d_linear(&a, &b).unwrap();
        let slow = direct_conv1d(&a, &b);
        let scale = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn conv2d_identity_and_box() {
        let a = Field::from_fn(6, 7, |i, j| (i * 7 + j) as f64);
        let mut delta = Field::zeros(3, 3);
        delta[(1, 1)] = 1.0;
        let out = conv2d_linear(&a, &delta, ConvMode::Same).unwrap();
        assert!(out.max_abs_diff(&a) < 1e-12);
        let ones5 = Field::filled(5, 5, 1.0);
        let ones3 = Field::filled(3, 3, 1.0);
        let full = conv2d_linear(&ones5, &ones3, ConvMode::Full).unwrap();
        assert_eq!(full.shape(), (7, 7));
        assert!((full[(3, 3)] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn conv2d_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Field::from_fn(12, 9, |_, _| rng.gen_range(-1.0..1.0));
        let k = Field::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let slow = direct_conv2d_full(&a, &k);
        let full = conv2d_linear(&a, &k, ConvMode::Full).unwrap();
        assert!(full.max_abs_diff(&slow) < 1e-10);
        let same = conv2d_linear(&a, &k, ConvMode::Same).unwrap();
        assert!(same.max_abs_diff(&slow.window(2, 2, 12, 9)) < 1e-10);
    }

    #[test]
    fn centered_forward_gives_circular_same_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Field::from_fn(10, 12, |_, _| rng.gen_range(0.0..1.0));
        let k = Field::from_fn(3, 5, |_, _| rng.gen_range(0.0..1.0));
        let plan = RealFft2d::new(16, 20);
        let out = plan.inverse(plan.forward(&a).product(&plan.forward_centered(&k, 1, 2)));
        let same = conv2d_linear(&a, &k, ConvMode::Same).unwrap();
        assert!(out.window(0, 0, 10, 12).max_abs_diff(&same) < 1e-12);
    }

    #[test]
    fn analytic_cosine_becomes_exponential() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..1000).map(|n| (2.0 * PI * 50.0 * n as f64 / fs).cos()).collect();
        let z = analytic_signal(&RealSignal::new(x.clone(), fs).unwrap()).unwrap();
        for (n, v) in z.samples.iter().enumerate() {
            assert_eq!(v.re, x[n]);
            let t = n as f64 / fs;
            assert!((v - Complex64::from_polar(1.0, 2.0 * PI * 50.0 * t)).norm() < 1e-6);
        }
    }

    #[test]
    fn analytic_constant_has_no_quadrature() {
        let z = analytic_signal(&RealSignal::new(vec![1.0; 64], 8.0).unwrap()).unwrap();
        assert!(z.samples.iter().all(|v| v.im.abs() < 1e-12));
    }

    #[test]
    fn hilbert_pair_of_sine_against_direct_dft() {
        // Quadrature built from an explicit O(n²) DFT as an independent reference.
        let fs = 1000.0;
        let n = 500;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * 80.0 * k as f64 / fs).sin()).collect();
        let z = analytic_signal(&RealSignal::new(x.clone(), fs).unwrap()).unwrap();
        let spec: Vec<Complex64> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|m| x[m] * Complex64::from_polar(1.0, -2.0 * PI * (k * m) as f64 / n as f64))
                    .sum()
            })
            .collect();
        for m in 50..n - 50 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, s) in spec.iter().enumerate().take(n / 2).skip(1) {
                acc += 2.0 * s * Complex64::from_polar(1.0, 2.0 * PI * (k * m) as f64 / n as f64);
            }
            let imag = acc.im / n as f64;
            assert!((z.samples[m].im - imag).abs() < 1e-6);
            let t = m as f64 / fs;
            assert!((z.samples[m].im + (2.0 * PI * 80.0 * t).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn analytic_energy_doubles_for_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        // Nyquist content is not doubled; remove it as well.
        let nyq: f64 = x.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -*v }).sum::<f64>() / 256.0;
        x.iter_mut().enumerate().for_each(|(k, v)| *v -= if k % 2 == 0 { nyq } else { -nyq });
        let z = analytic_signal(&RealSignal::new(x.clone(), 1.0).unwrap()).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ez: f64 = z.samples.iter().map(|v| v.norm_sqr()).sum();
        assert!((ez - 2.0 * ex).abs() < 1e-6 * ex);
    }

    #[test]
    fn parseval_under_continuous_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<Complex64> =
            (0..300).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let dt = 0.01;
        let (spec, dw) = continuous_spectrum(&x, dt);
        let et: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt;
        let ef: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() * dw;
        assert!((et - ef).abs() < 1e-9 * et);
    }

    proptest! {
        #[test]
        fn conv2d_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Field::from_fn(7, 6, |_, _| rng.gen_range(-1.0..1.0));
            let b = Field::from_fn(7, 6, |_, _| rng.gen_range(-1.0..1.0));
            let k = Field::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
            let mut mix = a.clone();
            mix.scale(alpha);
            mix.add_scaled(&b, beta);
            let lhs = conv2d_linear(&mix, &k, ConvMode::Full).unwrap();
            let mut rhs = conv2d_linear(&a, &k, ConvMode::Full).unwrap();
            rhs.scale(alpha);
            rhs.add_scaled(&conv2d_linear(&b, &k, ConvMode::Full).unwrap(), beta);
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }

        #[test]
        fn conv1d_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<Complex64> = (0..9).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let b: Vec<Complex64> = (0..9).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let k: Vec<Complex64> = (0..5).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
            let mix: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * alpha + y).collect();
            let lhs = conv1d_linear(&mix, &k).unwrap();
            let ca = conv1d_linear(&a, &k).unwrap();
            let cb = conv1d_linear(&b, &k).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (ca[i] * alpha + cb[i])).norm() < 1e-10);
            }
        }
    }
}
