//! Time-frequency analysis built around a constellation of fractional wavelet
//! transforms, entropic kernel weighting and positivity-constrained
//! deconvolution, with component tracking and evaluation metrics.

pub mod config;
pub mod deconv;
pub mod entropy;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod pipeline;
pub mod signals;
pub mod tracking;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{AnalyticSignal, Field, RealSignal, TfGrid, Tfr};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub struct GuideIntroduction;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/grids.md")]
pub struct GuideGrids;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/kernels.md")]
pub struct GuideKernels;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/transforms.md")]
pub struct GuideTransforms;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/entropy.md")]
pub struct GuideEntropy;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/deconvolution.md")]
pub struct GuideDeconvolution;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/tracking.md")]
pub struct GuideTracking;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
pub struct GuideMetrics;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub struct GuideCli;
