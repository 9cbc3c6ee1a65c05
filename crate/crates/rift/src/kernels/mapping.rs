//! Intended `(sigma, theta)` to implemented `(sigma0, kappa)` wavelet parameters.
//!
//! All quantities here are dimensionless: time is measured in units of the
//! grid isotropy constant and frequency in its reciprocal, so a kernel with
//! `sigma = 1` is round on the pixel grid.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on the validity boundary to absorb rounding in `sec^2`.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Wraps an angle into `(-pi/2, pi/2]`.
pub fn wrap_half_turn(theta: f64) -> f64 {
    let mut t = theta % PI;
    if t > FRAC_PI_2 {
        t -= PI;
    } else if t <= -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// Intended kernel: principal-axis std `sigma` and principal-axis angle `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub sigma: f64,
    pub theta: f64,
}

impl KernelSpec {
    /// Validates `sigma` and wraps `theta` into `(-pi/2, pi/2]`.
    pub fn new(sigma: f64, theta: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !theta.is_finite() {
            return Err(Error::Domain(format!("kernel spec sigma={sigma}, theta={theta}")));
        }
        Ok(KernelSpec { sigma, theta: wrap_half_turn(theta) })
    }

    pub fn is_isotropic(&self) -> bool {
        (self.sigma - 1.0).abs() < 1e-12
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Direct,
    Orthogonal,
    Isotropic,
}

/// Wavelet parameters actually used to realize a [`KernelSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplementedKernel {
    pub sigma0: f64,
    pub kappa: f64,
    pub branch: Branch,
    pub spec: KernelSpec,
}

impl ImplementedKernel {
    /// Picks the branch and solves for `(sigma0, kappa)`.
    ///
    /// Angles beyond the limit of the direct branch are realized on the
    /// orthogonal axis with `1/sigma`, which gives the same kernel.
    pub fn realize(spec: KernelSpec) -> Result<Self> {
        let spec = KernelSpec::new(spec.sigma, spec.theta)?;
        if spec.is_isotropic() {
            return Ok(ImplementedKernel { sigma0: 1.0, kappa: 0.0, branch: Branch::Isotropic, spec });
        }
        let limit = theta_limit(spec.sigma)?;
        let (sigma, theta, branch) = if spec.theta.abs() <= limit {
            (spec.sigma, spec.theta, Branch::Direct)
        } else {
            (1.0 / spec.sigma, spec.theta - spec.theta.signum() * FRAC_PI_2, Branch::Orthogonal)
        };
        let kappa = kappa_of(sigma, theta)?;
        let sigma0 = sigma0_of(sigma, kappa)?;
        Ok(ImplementedKernel { sigma0, kappa, branch, spec })
    }

    /// Inverse covariance of the implemented kernel over `(time, frequency)`.
    pub fn inverse_covariance(&self) -> [[f64; 2]; 2] {
        let s2 = self.sigma0 * self.sigma0;
        let tk = self.kappa.tan();
        let a = 1.0 / s2 + s2 * tk * tk;
        let b = -2.0 * s2 * tk;
        [[2.0 * a, b], [b, 2.0 * s2]]
    }

    /// Covariance of the implemented kernel over `(time, frequency)`.
    /// The inverse always has determinant 4.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let inv = self.inverse_covariance();
        [[inv[1][1] / 4.0, -inv[0][1] / 4.0], [-inv[1][0] / 4.0, inv[0][0] / 4.0]]
    }
}

/// Largest `|kappa|` the direct branch supports for this `sigma`.
pub fn kappa_max(sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (2.0 * s2 / (s2 * s2 + 1.0)).clamp(-1.0, 1.0).acos()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if (sigma - 1.0).abs() < 1e-12 {
        return Err(Error::Domain("sigma = 1 is the isotropic kernel".into()));
    }
    Ok(())
}

fn check_kappa(sigma: f64, kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa.abs() > kappa_max(sigma) + BOUNDARY_SLACK {
        return Err(Error::Domain(format!(
            "kappa {kappa} outside the valid range +-{} for sigma {sigma}",
            kappa_max(sigma)
        )));
    }
    Ok(())
}

/// Implemented Gaussian width giving principal-axis std `sigma` at chirp angle `kappa`.
pub fn sigma0_of(sigma: f64, kappa: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_kappa(sigma, kappa)?;
    let sum = sigma * sigma + 1.0 / (sigma * sigma);
    let sec2 = 1.0 / kappa.cos().powi(2);
    let disc = (sum * sum - 4.0 * sec2).max(0.0);
    let root = (sigma - 1.0).signum() * disc.sqrt();
    Ok(((sum + root) / (2.0 * sec2)).sqrt())
}

/// Angle at which the arctangent form of the principal-axis angle switches axes.
fn switch_angle(sigma: f64) -> f64 {
    let s4 = sigma.powi(4);
    let sum = sigma * sigma + 1.0 / (sigma * sigma);
    (sum * sum / (2.0 * (s4 + 1.0 / s4))).sqrt().min(1.0).acos()
}

/// Principal-axis angle of the kernel realized by `(sigma0_of(sigma, kappa), kappa)`.
pub fn phi_of(sigma: f64, kappa: f64) -> Result<f64> {
    let sigma0 = sigma0_of(sigma, kappa)?;
    let tk = kappa.tan();
    let denom = sigma0.powi(-4) + tk * tk - 1.0;
    let base = -0.5 * (2.0 * tk / denom).atan();
    let ks = switch_angle(sigma);
    let s = 1.0 + (sigma - 1.0).signum();
    let switch = FRAC_PI_4
        * s
        * (((kappa + ks) / PI).floor() + ((kappa - ks) / PI).floor() + 1.0);
    Ok(base + switch)
}

/// Largest `|theta|` reachable on the direct branch.
pub fn theta_limit(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(phi_of(sigma, kappa_max(sigma))?.abs())
}

/// Chirp angle whose realized principal axis lies at `theta`.
pub fn kappa_of(sigma: f64, theta: f64) -> Result<f64> {
    let limit = theta_limit(sigma)?;
    if !theta.is_finite() || theta.abs() > limit + BOUNDARY_SLACK {
        return Err(Error::Domain(format!(
            "theta {theta} beyond the direct-branch limit {limit} for sigma {sigma}"
        )));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let km = kappa_max(sigma);
    // Increasing in kappa above sigma = 1, decreasing below.
    let dir = (sigma - 1.0).signum();
    let (mut lo, mut hi) = (-km, km);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dir * (phi_of(sigma, mid)? - theta) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (phi_of(sigma, lo)?, phi_of(sigma, hi)?);
    Ok(if (flo - theta).abs() <= (fhi - theta).abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Angle of the axis whose variance is `sigma^2 / 2`, from an explicit
    /// eigendecomposition of the inverse covariance.
    fn eigen_axis(sigma: f64, sigma0: f64, kappa: f64) -> (f64, f64) {
        let k = ImplementedKernel {
            sigma0,
            kappa,
            branch: Branch::Direct,
            spec: KernelSpec { sigma, theta: 0.0 },
        };
        let c = k.covariance();
        let (p, q, r) = (c[0][0], c[0][1], c[1][1]);
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
        let (big, small) = (mean + rad, mean - rad);
        let want = if sigma > 1.0 { big } else { small };
        // Eigenvector (q, want - p) or (want - r, q), whichever is better conditioned.
        let (vx, vy) = if (want - p).abs() + q.abs() > (want - r).abs() + q.abs() {
            (q, want - p)
        } else {
            (want - r, q)
        };
        (wrap_half_turn(vy.atan2(vx)), want)
    }

    #[test]
    fn zero_chirp_keeps_sigma() {
        assert!((sigma0_of(2.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((sigma0_of(0.5, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(phi_of(2.0, 0.0).unwrap(), 0.0);
        assert_eq!(phi_of(0.3, 0.0).unwrap(), 0.0);
        assert_eq!(kappa_of(2.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sigma0_reproduces_principal_variance() {
        let s0 = sigma0_of(3.0, 0.3).unwrap();
        let (_, var) = eigen_axis(3.0, s0, 0.3);
        assert!(((2.0 * var).sqrt() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn phi_matches_eigen_angle() {
        let s0 = sigma0_of(2.0, 0.5).unwrap();
        let (angle, _) = eigen_axis(2.0, s0, 0.5);
        assert!((phi_of(2.0, 0.5).unwrap() - angle).abs() < 1e-8);
    }

    #[test]
    fn phi_tends_to_kappa_for_wide_kernels() {
        assert!((phi_of(1e4, 0.4).unwrap() - 0.4).abs() < 1e-4);
    }

    #[test]
    fn kappa_of_hits_target_angle() {
        let k = kappa_of(2.0, 0.3).unwrap();
        let (angle, _) = eigen_axis(2.0, sigma0_of(2.0, k).unwrap(), k);
        assert!((angle - 0.3).abs() < 1e-9);
    }

    #[test]
    fn theta_limit_behaviour() {
        assert!(theta_limit(100.0).unwrap() > 1.55);
        assert!(theta_limit(1.0).is_err());
        // Reciprocal widths split the quarter turn between them.
        for s in [1.1, 2.0, 3.7, 10.0] {
            let sum = theta_limit(s).unwrap() + theta_limit(1.0 / s).unwrap();
            assert!((sum - FRAC_PI_2).abs() < 1e-9, "sigma {s}: {sum}");
            let km = kappa_max(s);
            assert!((theta_limit(s).unwrap() - (FRAC_PI_4 + km / 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn validity_boundary_is_exact() {
        for s in [0.2, 0.7, 1.3, 4.0] {
            let km = kappa_max(s);
            assert!(phi_of(s, km).unwrap().is_finite());
            assert!(phi_of(s, -km).unwrap().is_finite());
            assert!(phi_of(s, km * 1.001).is_err());
        }
        assert!(kappa_of(2.0, theta_limit(2.0).unwrap() + 0.01).is_err());
    }

    #[test]
    fn realize_picks_branches() {
        let iso = ImplementedKernel::realize(KernelSpec::new(1.0, 0.7).unwrap()).unwrap();
        assert_eq!(iso.branch, Branch::Isotropic);
        let d = ImplementedKernel::realize(KernelSpec::new(2.0, 0.3).unwrap()).unwrap();
        assert_eq!(d.branch, Branch::Direct);
        let o = ImplementedKernel::realize(KernelSpec::new(2.0, 1.5).unwrap()).unwrap();
        assert_eq!(o.branch, Branch::Orthogonal);
        let (angle, var) = eigen_axis(2.0, d.sigma0, d.kappa);
        assert!((angle - 0.3).abs() < 1e-9 && (var - 2.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn round_trip(sigma in 0.15f64..8.0, frac in -0.999f64..0.999) {
            prop_assume!((sigma - 1.0).abs() > 1e-3);
            let theta = frac * theta_limit(sigma).unwrap();
            let k = kappa_of(sigma, theta).unwrap();
            prop_assert!((phi_of(sigma, k).unwrap() - theta).abs() < 1e-9);
        }

        #[test]
        fn phi_agrees_with_eigen_oracle(sigma in 0.15f64..8.0, frac in -0.999f64..0.999) {
            prop_assume!((sigma - 1.0).abs() > 1e-3);
            let kappa = frac * kappa_max(sigma);
            let s0 = sigma0_of(sigma, kappa).unwrap();
            let (angle, var) = eigen_axis(sigma, s0, kappa);
            let phi = phi_of(sigma, kappa).unwrap();
            prop_assert!(wrap_half_turn(phi - angle).abs() < 1e-7);
            prop_assert!(((2.0 * var).sqrt() - sigma).abs() < 1e-7 * sigma.max(1.0));
        }
    }
}
