//! Wavelet windows, intended-to-implemented kernel mappings, Cohen's-class
//! kernel rasters and the kernel constellation.

mod constellation;
mod mapping;
mod quantile;
mod window;

pub use constellation::{
    build_constellation, build_entry, sigma_grid, theta_grid, Constellation, ConstellationConfig,
    ConstellationEntry, EntrySummary, MRule,
};
pub use mapping::{
    kappa_max, kappa_of, phi_of, sigma0_of, theta_limit, wrap_half_turn, Branch, ImplementedKernel,
    KernelSpec,
};
pub use quantile::inverse_normal_cdf;
pub use window::{
    cohen_kernel, cohen_kernel_with_support, envelope_std, make_window, raster_half_support,
    window_half_len, Window, RASTER_SUPPORT_STDS, WINDOW_SUPPORT_STDS,
};
