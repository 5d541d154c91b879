//! Analytic kernel constructors.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Kernel;

/// Amplitude and width of an isotropic Gaussian `α·exp(-(x²+y²)/(2σ²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl GaussianParams {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if !alpha.is_finite() {
            return Err(Error::Argument(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { alpha, sigma })
    }

    pub fn kernel(&self, side: usize) -> Result<Kernel> {
        gaussian_kernel(side, self.sigma, self.alpha)
    }
}

/// Samples `α·exp(-(x²+y²)/(2σ²))` at integer offsets from the center.
///
/// The exponent is computed from the integer `x² + y²`, so mirrored and
/// transposed entries are bitwise equal.
pub fn gaussian_kernel(side: usize, sigma: f64, alpha: f64) -> Result<Kernel> {
    check_sigma(sigma)?;
    let denom = 2.0 * sigma * sigma;
    Kernel::from_offsets(side, |dy, dx| {
        let r2 = (dy * dy + dx * dx) as f64;
        alpha * (-r2 / denom).exp()
    })
}

/// `ΔG_σ(x, y) = (x² + y² - 2σ²) / (2πσ⁶) · exp(-(x² + y²) / (2σ²))`
/// where `G_σ` is the unit-mass Gaussian.
pub fn log_value(dy: f64, dx: f64, sigma: f64) -> f64 {
    let r2 = dy * dy + dx * dx;
    let s2 = sigma * sigma;
    (r2 - 2.0 * s2) / (2.0 * PI * s2 * s2 * s2) * (-r2 / (2.0 * s2)).exp()
}

/// Sampled Laplacian of Gaussian, negated when `minus`, then shifted by its
/// mean so the entries sum to zero and the kernel annihilates constants.
pub fn log_kernel(side: usize, sigma: f64, minus: bool) -> Result<Kernel> {
    check_sigma(sigma)?;
    let sign = if minus { -1.0 } else { 1.0 };
    let raw = Kernel::from_offsets(side, |dy, dx| sign * log_value(dy as f64, dx as f64, sigma))?;
    let mean = raw.sum() / (side * side) as f64;
    Kernel::from_offsets(side, |dy, dx| {
        let r = (dy + raw.half() as i64) as usize;
        let c = (dx + raw.half() as i64) as usize;
        raw.get(r, c) - mean
    })
}

/// The five-point stencil `[[0, 1, 0], [1, -4, 1], [0, 1, 0]]`.
pub fn discrete_laplacian() -> Kernel {
    Kernel::new(3, vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0]).expect("valid stencil")
}

/// The convolution identity: 1 at the center, 0 elsewhere.
pub fn delta_kernel(side: usize) -> Result<Kernel> {
    Kernel::from_offsets(side, |dy, dx| if dy == 0 && dx == 0 { 1.0 } else { 0.0 })
}

/// `(1/2π)·log r` sampled on an odd grid: the fundamental solution of the
/// planar Laplacian.
///
/// The origin takes the constant of the lattice Green's function,
/// `-(γ + 3/2·ln 2) / (2π)`, so that the five-point Laplacian of the grid is
/// close to a unit impulse there as well.
pub fn log_radius_kernel(side: usize) -> Result<Kernel> {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let origin = -(EULER_GAMMA + 1.5 * std::f64::consts::LN_2) / (2.0 * PI);
    Kernel::from_offsets(side, |dy, dx| {
        if dy == 0 && dx == 0 {
            origin
        } else {
            ((dy * dy + dx * dx) as f64).sqrt().ln() / (2.0 * PI)
        }
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}
