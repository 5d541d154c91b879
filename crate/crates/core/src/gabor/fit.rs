//! Multi-start Levenberg–Marquardt fit of a Gabor function to a kernel.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::{gabor_eval, GaborParams};
use crate::error::{Error, Result};
use crate::grid::Kernel;
use crate::metrics::corr2;

pub const START_ORIENTATIONS: usize = 8;
pub const START_FREQUENCIES: [f64; 3] = [0.05, 0.1, 0.2];

const JACOBIAN_STEP: f64 = 1e-5;
const MAX_ITERS: usize = 300;
const NPARAMS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOutcome {
    /// Canonical parameters.
    pub params: GaborParams,
    /// `corr2(k, gabor_eval(params))`.
    pub corr: f64,
    /// Sum of squared residuals.
    pub sse: f64,
}

/// Starting points: [`START_ORIENTATIONS`] orientations `kπ/8` times
/// [`START_FREQUENCIES`], centered, with isotropic width `side/5`. Amplitude
/// and phase are filled in per kernel by linear projection.
pub fn start_grid(side: usize) -> Vec<GaborParams> {
    let sigma = side as f64 / 5.0;
    let mut starts = Vec::with_capacity(START_ORIENTATIONS * START_FREQUENCIES.len());
    for k in 0..START_ORIENTATIONS {
        let theta = k as f64 * PI / START_ORIENTATIONS as f64;
        for &f in &START_FREQUENCIES {
            starts.push(GaborParams {
                amplitude: 1.0,
                x0: 0.0,
                y0: 0.0,
                theta,
                sigma_x: sigma,
                sigma_y: sigma,
                f,
                phi: 0.0,
            });
        }
    }
    starts
}

/// Least-squares Gabor fit over the default [`start_grid`].
pub fn fit_gabor(k: &Kernel) -> Result<FitOutcome> {
    fit_gabor_with_starts(k, &start_grid(k.side()))
}

/// Runs the local optimizer from each start and keeps the lowest residual;
/// ties go to the earlier start.
pub fn fit_gabor_with_starts(k: &Kernel, starts: &[GaborParams]) -> Result<FitOutcome> {
    if k.as_image().max() == k.as_image().min() {
        return Err(Error::DegenerateNormalization);
    }
    let coords = grid_coords(k.side());
    let target = k.data();
    let mut best: Option<([f64; NPARAMS], f64)> = None;
    for start in starts {
        let mut p = start.to_vec();
        project_amplitude_phase(&mut p, &coords, target);
        let (p, sse) = levenberg_marquardt(p, &coords, target);
        let admissible = sse.is_finite() && p[4].abs() > 1e-6 && p[5].abs() > 1e-6;
        if admissible && best.as_ref().is_none_or(|b| sse < b.1) {
            best = Some((p, sse));
        }
    }
    let Some((p, sse)) = best else {
        return Err(Error::FitFailure {
            best_residual: f64::INFINITY,
            detail: format!("no admissible Gabor fit from {} starts", starts.len()),
        });
    };
    let params = GaborParams::from_vec(&p).canonical();
    let fitted = gabor_eval(&params, k.side())?;
    let corr = corr2(k, &fitted).map_err(|_| Error::FitFailure {
        best_residual: sse,
        detail: "fitted Gabor is constant".into(),
    })?;
    Ok(FitOutcome { params, corr, sse })
}

fn grid_coords(side: usize) -> Vec<(f64, f64)> {
    let h = (side / 2) as i64;
    let mut out = Vec::with_capacity(side * side);
    for dy in -h..=h {
        for dx in -h..=h {
            out.push((dx as f64, -(dy as f64)));
        }
    }
    out
}

fn model(p: &[f64], coords: &[(f64, f64)], out: &mut [f64]) {
    let g = GaborParams::from_vec(p);
    for (o, &(x, y)) in out.iter_mut().zip(coords) {
        *o = g.value(x, y);
    }
}

fn sse_of(p: &[f64], coords: &[(f64, f64)], target: &[f64], scratch: &mut [f64]) -> f64 {
    model(p, coords, scratch);
    scratch.iter().zip(target).map(|(m, t)| (m - t) * (m - t)).sum()
}

/// For fixed geometry the model is `a·E·cos(2πf x′) - b·E·sin(2πf x′)` with
/// `a = A cos φ`, `b = A sin φ`; solves that 2×2 least-squares problem.
fn project_amplitude_phase(p: &mut [f64; NPARAMS], coords: &[(f64, f64)], target: &[f64]) {
    let mut unit_cos = *p;
    unit_cos[0] = 1.0;
    unit_cos[7] = 0.0;
    let mut unit_sin = unit_cos;
    unit_sin[7] = PI / 2.0;
    let n = coords.len();
    let (mut c, mut s) = (vec![0.0; n], vec![0.0; n]);
    model(&unit_cos, coords, &mut c);
    // cos(u + π/2) = -sin(u), so this basis already carries the minus sign
    model(&unit_sin, coords, &mut s);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (cc, ss, cs) = (dot(&c, &c), dot(&s, &s), dot(&c, &s));
    let (ct, st) = (dot(&c, target), dot(&s, target));
    let det = cc * ss - cs * cs;
    if det.abs() <= 1e-14 * cc.max(ss).max(1e-300) {
        p[0] = if cc > 0.0 { ct / cc } else { 0.0 };
        p[7] = 0.0;
        return;
    }
    let a = (ct * ss - st * cs) / det;
    let b = (st * cc - ct * cs) / det;
    p[0] = a.hypot(b);
    p[7] = b.atan2(a);
}

fn levenberg_marquardt(mut p: [f64; NPARAMS], coords: &[(f64, f64)], target: &[f64]) -> ([f64; NPARAMS], f64) {
    let n = coords.len();
    let mut scratch = vec![0.0; n];
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    let mut residual = vec![0.0; n];
    let mut sse = sse_of(&p, coords, target, &mut scratch);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERS {
        if !sse.is_finite() || sse < 1e-30 {
            break;
        }
        model(&p, coords, &mut scratch);
        for ((r, m), t) in residual.iter_mut().zip(&scratch).zip(target) {
            *r = m - t;
        }
        let mut jac = DMatrix::<f64>::zeros(n, NPARAMS);
        for j in 0..NPARAMS {
            let mut hi = p;
            let mut lo = p;
            hi[j] += JACOBIAN_STEP;
            lo[j] -= JACOBIAN_STEP;
            model(&hi, coords, &mut fwd);
            model(&lo, coords, &mut bwd);
            for i in 0..n {
                jac[(i, j)] = (fwd[i] - bwd[i]) / (2.0 * JACOBIAN_STEP);
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&residual);
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for j in 0..NPARAMS {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for j in 0..NPARAMS {
                trial[j] += step[j];
            }
            let trial_sse = sse_of(&trial, coords, target, &mut scratch);
            if trial_sse.is_finite() && trial_sse < sse {
                let gain = (sse - trial_sse) / sse;
                p = trial;
                sse = trial_sse;
                lambda = (lambda / 3.0).max(1e-12);
                improved = gain > 1e-15 || step.amax() > 1e-12;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    // keep angles bounded so equivalent optima compare cleanly
    p[3] = p[3].rem_euclid(TAU);
    (p, sse)
}
