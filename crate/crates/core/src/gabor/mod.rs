//! Gabor functions, their least-squares fitting, and population statistics of
//! fitted filter banks.
//!
//! Coordinates: `x` grows to the right along columns and `y` grows upward
//! (against the row index), both measured from the kernel center, so a
//! positive `theta` turns the carrier counterclockwise as displayed, the same
//! sense as [`crate::transform::rotate`].

mod bank;
mod fit;
mod ringach;

use std::f64::consts::{PI, TAU};

use crate::error::Result;
use crate::grid::Kernel;

pub use bank::{effective_bank, fit_bank, load_bank, save_bank, scatter_csv, BankFit, FilterBank};
pub use fit::{fit_gabor, fit_gabor_with_starts, start_grid, FitOutcome, START_FREQUENCIES, START_ORIENTATIONS};
pub use ringach::{fit_ringach_lines, ringach_point, single_line_sse, PiecewiseFit, RingachPoint};

/// `A·exp(-x′²/(2σx²) - y′²/(2σy²))·cos(2πf·x′ + φ)` with
/// `x′ = (x-x0)cosθ + (y-y0)sinθ`, `y′ = -(x-x0)sinθ + (y-y0)cosθ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborParams {
    pub amplitude: f64,
    pub x0: f64,
    pub y0: f64,
    pub theta: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Cycles per pixel.
    pub f: f64,
    pub phi: f64,
}

impl GaborParams {
    pub(crate) fn to_vec(self) -> [f64; 8] {
        [
            self.amplitude,
            self.x0,
            self.y0,
            self.theta,
            self.sigma_x,
            self.sigma_y,
            self.f,
            self.phi,
        ]
    }

    pub(crate) fn from_vec(v: &[f64]) -> Self {
        Self {
            amplitude: v[0],
            x0: v[1],
            y0: v[2],
            theta: v[3],
            sigma_x: v[4],
            sigma_y: v[5],
            f: v[6],
            phi: v[7],
        }
    }

    /// Value at `(x, y)` in center-relative coordinates.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let xp = dx * c + dy * s;
        let yp = -dx * s + dy * c;
        let env =
            (-xp * xp / (2.0 * self.sigma_x * self.sigma_x) - yp * yp / (2.0 * self.sigma_y * self.sigma_y)).exp();
        self.amplitude * env * (TAU * self.f * xp + self.phi).cos()
    }

    /// Collapses the parameter symmetries of the Gabor function:
    /// `σ → |σ|`; `(f, φ) → (-f, -φ)` for negative `f`; `(A, φ) → (-A, φ+π)`
    /// for negative `A`; `(θ, φ) → (θ-π, -φ)` to bring `θ` into `[0, π)`;
    /// finally `φ` is wrapped into `(-π, π]`.
    pub fn canonical(&self) -> Self {
        let mut p = *self;
        p.sigma_x = p.sigma_x.abs();
        p.sigma_y = p.sigma_y.abs();
        if p.f < 0.0 {
            p.f = -p.f;
            p.phi = -p.phi;
        }
        if p.amplitude < 0.0 {
            p.amplitude = -p.amplitude;
            p.phi += PI;
        }
        p.theta = p.theta.rem_euclid(TAU);
        if p.theta >= PI {
            p.theta -= PI;
            p.phi = -p.phi;
        }
        // rem_euclid can round up to the modulus itself
        if p.theta >= PI {
            p.theta = 0.0;
        }
        p.phi = wrap_phase(p.phi);
        p
    }
}

/// Wraps into `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Samples the Gabor function at the integer offsets of an odd grid.
pub fn gabor_eval(p: &GaborParams, side: usize) -> Result<Kernel> {
    Kernel::from_offsets(side, |dy, dx| p.value(dx as f64, -(dy as f64)))
}
