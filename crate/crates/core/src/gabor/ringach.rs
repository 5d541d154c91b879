//! Dimensionless elongation coordinates `(σx·f, σy·f)` and the two-segment
//! line fit used to summarize a population of them.

use super::GaborParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingachPoint {
    pub n_x: f64,
    pub n_y: f64,
}

pub fn ringach_point(p: &GaborParams) -> RingachPoint {
    let f = p.f.abs();
    RingachPoint {
        n_x: p.sigma_x.abs() * f,
        n_y: p.sigma_y.abs() * f,
    }
}

/// A line `y = αx` up to `(x_b, αx_b)`, continued with slope `slope2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiecewiseFit {
    pub alpha: f64,
    pub breakpoint: (f64, f64),
    pub slope2: f64,
    pub sse: f64,
    /// Number of points (in ascending `n_x` order) on the first segment.
    pub split: usize,
}

impl PiecewiseFit {
    pub fn predict(&self, x: f64) -> f64 {
        if x <= self.breakpoint.0 {
            self.alpha * x
        } else {
            self.breakpoint.1 + self.slope2 * (x - self.breakpoint.0)
        }
    }
}

/// SSE of the best line through the origin.
pub fn single_line_sse(points: &[RingachPoint]) -> f64 {
    let (alpha, sse) = origin_line(points);
    debug_assert!(alpha.is_finite() || points.is_empty());
    sse
}

/// Sorts by `n_x` and scans every split. The lower group gets the
/// least-squares slope through origin; the rest gets the least-squares line
/// anchored at `(x_b, α·x_b)`, where `x_b` is optimized over the gap between
/// the two groups (from the largest lower `n_x` to the smallest upper one).
/// Keeping every point on the first segment is one of the candidates, so the
/// total SSE never exceeds [`single_line_sse`].
pub fn fit_ringach_lines(points: &[RingachPoint]) -> Result<PiecewiseFit> {
    if points.len() < 4 {
        return Err(Error::Argument(format!(
            "a two-segment fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.n_x.is_finite() || !p.n_y.is_finite()) {
        return Err(Error::Argument("points must be finite".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.n_x.total_cmp(&b.n_x));
    let mut best: Option<PiecewiseFit> = None;
    for split in 1..=sorted.len() {
        let (lower, upper) = sorted.split_at(split);
        if lower.iter().all(|p| p.n_x == 0.0) {
            continue;
        }
        let (alpha, sse_lower) = origin_line(lower);
        let lo = lower[split - 1].n_x;
        let mut anchors = vec![lo];
        if let Some(first) = upper.first() {
            anchors.push(first.n_x);
            // Where the free least-squares line meets y = αx. If that lies in
            // the gap, it is the constrained optimum.
            if let Some((s, c)) = free_line(upper) {
                let x = c / (alpha - s);
                if x.is_finite() && x > lo && x < first.n_x {
                    anchors.push(x);
                }
            }
        }
        for xb in anchors {
            let (slope2, sse_upper) = anchored_line(upper, xb, alpha * xb, alpha);
            let candidate = PiecewiseFit {
                alpha,
                breakpoint: (xb, alpha * xb),
                slope2,
                sse: sse_lower + sse_upper,
                split,
            };
            if best.as_ref().is_none_or(|b| candidate.sse < b.sse) {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| Error::Argument("all points have n_x = 0".into()))
}

/// Least-squares slope and SSE of a line through `(xb, yb)`; `fallback` is
/// the slope when the points carry no horizontal spread around `xb`.
fn anchored_line(points: &[RingachPoint], xb: f64, yb: f64, fallback: f64) -> (f64, f64) {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.n_x - xb, p.n_y - yb);
        sxy += dx * dy;
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { fallback };
    let sse = points.iter().map(|p| (p.n_y - yb - slope * (p.n_x - xb)).powi(2)).sum();
    (slope, sse)
}

/// Unconstrained least-squares line `y = s·x + c`, if the points span more
/// than one `n_x`.
fn free_line(points: &[RingachPoint]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.n_x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.n_y).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        sxy += (p.n_x - mx) * (p.n_y - my);
        sxx += (p.n_x - mx).powi(2);
    }
    (sxx > 0.0).then(|| {
        let s = sxy / sxx;
        (s, my - s * mx)
    })
}

fn origin_line(points: &[RingachPoint]) -> (f64, f64) {
    let (sxy, sxx) = points
        .iter()
        .fold((0.0, 0.0), |(sxy, sxx), p| (sxy + p.n_x * p.n_y, sxx + p.n_x * p.n_x));
    let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = points.iter().map(|p| (p.n_y - alpha * p.n_x).powi(2)).sum();
    (alpha, sse)
}
