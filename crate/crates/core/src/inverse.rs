//! Iterative approximation of a convolution inverse on a truncated grid.
//!
//! Given `m`, find `M̃` on a `support_side` grid with `m ∗ M̃ ≈ δ`. Every
//! convolution is cropped to the support grid (zero outside).

use std::fmt::Write as _;
use std::path::Path;

use crate::conv::convolve_cropped_into;
use crate::error::{Error, Result};
use crate::grid::{check_odd_side, Kernel};
use crate::io::write_bytes;
use crate::kernels::delta_kernel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InverseMode {
    /// `M̃ ← M̃ + dt·(m ∗ M̃ − δ)`.
    Richardson,
    /// `M̃ ← M̃ − dt·m♭ ∗ (m ∗ M̃ − δ)`, steepest descent on `½‖m ∗ M̃ − δ‖²`.
    #[default]
    LeastSquares,
}

impl InverseMode {
    pub fn name(self) -> &'static str {
        match self {
            InverseMode::Richardson => "richardson",
            InverseMode::LeastSquares => "least-squares",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseConfig {
    pub dt: f64,
    /// Stop once `‖M̃ₜ₊₁ − M̃ₜ‖₁ / |dt| < epsilon`.
    pub epsilon: f64,
    pub max_iters: usize,
    pub support_side: usize,
    pub mode: InverseMode,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            epsilon: 1e-8,
            max_iters: 2_000,
            support_side: 21,
            mode: InverseMode::LeastSquares,
        }
    }
}

impl InverseConfig {
    pub fn validate(&self, m: &Kernel) -> Result<()> {
        if !(self.dt != 0.0 && self.dt.is_finite()) {
            return Err(Error::Argument(format!(
                "dt must be finite and non-zero, got {}",
                self.dt
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be positive".into()));
        }
        check_odd_side(self.support_side)?;
        if self.support_side < m.side() {
            return Err(Error::Argument(format!(
                "support {} is smaller than the {}x{} kernel",
                self.support_side,
                m.side(),
                m.side()
            )));
        }
        Ok(())
    }
}

/// Update norms above this abort the iteration.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct InverseResult {
    pub m_tilde: Kernel,
    /// `‖m ∗ M̃ − δ‖₁` on the support grid for the final iterate.
    pub residual_l1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖m ∗ M̃ − δ‖₁` after each iteration.
    pub residual_trace: Vec<f64>,
    /// `‖m ∗ M̃ − δ‖₂` after each iteration. Least-squares steps below the
    /// stability bound never increase it; the L1 trace carries no such
    /// guarantee.
    pub residual_l2_trace: Vec<f64>,
    /// `‖M̃ₜ₊₁ − M̃ₜ‖₁ / |dt|` for each iteration.
    pub update_trace: Vec<f64>,
}

impl InverseResult {
    /// `iter,residual_l1,update_l1`, one row per iteration starting at 1.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,residual_l1,update_l1\n");
        for (i, (r, u)) in self.residual_trace.iter().zip(&self.update_trace).enumerate() {
            let _ = writeln!(out, "{},{r:.16e},{u:.16e}", i + 1);
        }
        out
    }

    pub fn save_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.trace_csv().as_bytes())
    }
}

/// Upper bound on a least-squares step that guarantees descent: the operator
/// norm of convolution by `m` is at most `‖m‖₁`, so `dt < 2 / ‖m‖₁²` keeps
/// `½‖m ∗ M̃ − δ‖²` decreasing. In [`InverseMode::LeastSquares`] the kernel is
/// scaled to unit L2 norm first, and this bound applies to the scaled kernel.
pub fn least_squares_dt_bound(m: &Kernel) -> f64 {
    let l1 = m.l1_norm();
    2.0 / (l1 * l1)
}

/// Runs the configured iteration from `M̃₀ = δ`.
///
/// In least-squares mode `m` is divided by its L2 norm `s` before iterating
/// and the iterate divided by `s` afterwards, so `dt` is scale-free. The
/// stopping rule and traces always refer to the inverse of the unscaled `m`.
pub fn invert_kernel(m: &Kernel, cfg: &InverseConfig) -> Result<InverseResult> {
    cfg.validate(m)?;
    let side = cfg.support_side;
    let scale = match cfg.mode {
        InverseMode::Richardson => 1.0,
        InverseMode::LeastSquares => {
            let s = m.l2_norm();
            if s == 0.0 {
                return Err(Error::Argument("cannot invert the zero kernel".into()));
            }
            s
        }
    };
    let op = m.scale(1.0 / scale);
    let flipped = op.flipped();
    let n = side * side;
    let mut x = delta_kernel(side)?.into_image().into_data();
    let mut residual = vec![0.0; n];
    let mut direction = vec![0.0; n];
    residual_into(&op, &x, side, &mut residual);
    let mut residual_trace = Vec::new();
    let mut residual_l2_trace = Vec::new();
    let mut update_trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=cfg.max_iters {
        let step = match cfg.mode {
            InverseMode::Richardson => {
                direction.copy_from_slice(&residual);
                cfg.dt
            }
            InverseMode::LeastSquares => {
                convolve_cropped_into(&flipped, &residual, side, &mut direction, side);
                -cfg.dt
            }
        };
        let mut update_l1 = 0.0;
        for (v, d) in x.iter_mut().zip(&direction) {
            let delta = step * d;
            *v += delta;
            update_l1 += delta.abs();
        }
        let update_l1 = update_l1 / scale;
        if !(update_l1 <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence {
                mode: cfg.mode.name(),
                dt: cfg.dt,
                iteration,
                update_norm: update_l1,
            });
        }
        residual_into(&op, &x, side, &mut residual);
        let update = update_l1 / cfg.dt.abs();
        residual_trace.push(l1(&residual));
        residual_l2_trace.push(residual.iter().map(|v| v * v).sum::<f64>().sqrt());
        update_trace.push(update);
        if update < cfg.epsilon {
            converged = true;
            break;
        }
    }
    let m_tilde = Kernel::new(side, x)?.scale(1.0 / scale);
    Ok(InverseResult {
        m_tilde,
        residual_l1: l1(&residual),
        iterations: residual_trace.len(),
        converged,
        residual_trace,
        residual_l2_trace,
        update_trace,
    })
}

/// `m ∗ x − δ` on the `side × side` grid of `x`.
fn residual_into(m: &Kernel, x: &[f64], side: usize, out: &mut [f64]) {
    convolve_cropped_into(m, x, side, out, side);
    out[side * side / 2] -= 1.0;
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}
