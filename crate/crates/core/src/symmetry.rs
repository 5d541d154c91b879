//! Rotational symmetrization of filters and isotropic Gaussian fitting.

use crate::error::{Error, Result};
use crate::grid::{Image, Kernel};
use crate::kernels::{gaussian_kernel, GaussianParams};
use crate::metrics::{corr2, normalize_image, normalize_zero_mean_unit_l2};
use crate::parallel;
use crate::transform::{resize, rotate, Interpolation};

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    /// Zero-mean, unit-L2 rotationally symmetrized kernel.
    pub symmetrized: Kernel,
    /// `corr2` between the normalized input and `symmetrized`.
    pub correlation: f64,
}

pub const UPSAMPLE: f64 = 3.0;

/// Upsample ×3 (bilinear), average the rotations by 1°, 2°, …, 360°
/// (bilinear, same size), downsample ×1/3 (nearest), then normalize to zero
/// mean and unit L2 norm.
///
/// Each upsampled pixel is averaged only over the rotations that sample
/// inside the grid: the rotation sum is divided by the same sum taken over an
/// all-ones image. Constants and radial profiles are then fixed points, so a
/// second pass leaves the result nearly unchanged.
pub fn symmetrize(k: &Kernel) -> Result<SymmetryReport> {
    let normalized = normalize_zero_mean_unit_l2(k)?;
    let up = resize(k.as_image(), UPSAMPLE, Interpolation::Bilinear)?;
    let summed = rotation_sum(&up);
    let coverage = rotation_sum(&Image::filled(up.rows(), up.cols(), 1.0));
    let averaged = Image::from_fn(up.rows(), up.cols(), |r, c| summed.get(r, c) / coverage.get(r, c));
    let down = resize(&averaged, 1.0 / UPSAMPLE, Interpolation::Nearest)?;
    debug_assert_eq!(down.rows(), k.side());
    let symmetrized = Kernel::try_from(normalize_image(&down)?)?;
    let correlation = corr2(&normalized, &symmetrized)?;
    Ok(SymmetryReport {
        symmetrized,
        correlation,
    })
}

/// Sum of the 360 whole-degree rotations (zero fill), accumulated in angle
/// order. The 360° term is the identity, so every pixel gets positive weight.
fn rotation_sum(image: &Image) -> Image {
    let angles: Vec<u32> = (1..=360).collect();
    let rotations = parallel::map(&angles, |&d| rotate(image, f64::from(d), Interpolation::Bilinear, 0.0));
    let mut acc = vec![0.0; image.len()];
    for r in &rotations {
        for (a, v) in acc.iter_mut().zip(r.data()) {
            *a += v;
        }
    }
    Image::new(image.rows(), image.cols(), acc).expect("finite sum")
}

pub const SIGMA_STARTS: usize = 32;
pub const SIGMA_MIN: f64 = 0.2;

/// Least-squares fit of `α·exp(-(x²+y²)/(2σ²))` to `k`.
///
/// For fixed σ the amplitude is the linear least-squares projection. σ is
/// bracketed on a log-spaced grid of [`SIGMA_STARTS`] points over
/// `[0.2, side]`, each interval refined by golden-section search. Returns the
/// fit and `corr2(k, fit)`.
pub fn fit_gaussian(k: &Kernel) -> Result<(GaussianParams, f64)> {
    if k.as_image().max() == k.as_image().min() {
        return Err(Error::DegenerateNormalization);
    }
    let side = k.side();
    let (lo, hi) = (SIGMA_MIN, side as f64);
    let grid: Vec<f64> = (0..SIGMA_STARTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / (SIGMA_STARTS - 1) as f64))
        .collect();
    let objective = |sigma: f64| gaussian_sse(k, sigma);
    let mut best = (f64::INFINITY, lo);
    for w in grid.windows(2) {
        let (sigma, sse) = golden_section(&objective, w[0], w[1]);
        if sse < best.0 {
            best = (sse, sigma);
        }
    }
    let (sse, sigma) = best;
    let at_bound = |s: f64| ((s - lo) / lo).abs() < 1e-9 || ((s - hi) / hi).abs() < 1e-9;
    if !sse.is_finite() || at_bound(sigma) {
        return Err(Error::FitFailure {
            best_residual: sse,
            detail: format!("sigma driven to the search bound ({sigma})"),
        });
    }
    let (alpha, _) = gaussian_projection(k, sigma);
    let params = GaussianParams::new(alpha, sigma)?;
    let fit = params.kernel(side)?;
    let corr = corr2(k, &fit)?;
    Ok((params, corr))
}

/// Optimal amplitude for a fixed width and the resulting squared error.
fn gaussian_projection(k: &Kernel, sigma: f64) -> (f64, f64) {
    let g = gaussian_kernel(k.side(), sigma, 1.0).expect("positive sigma");
    let (kg, gg) = k
        .data()
        .iter()
        .zip(g.data())
        .fold((0.0, 0.0), |(kg, gg), (a, b)| (kg + a * b, gg + b * b));
    let alpha = kg / gg;
    let sse = k
        .data()
        .iter()
        .zip(g.data())
        .map(|(a, b)| (a - alpha * b).powi(2))
        .sum();
    (alpha, sse)
}

fn gaussian_sse(k: &Kernel, sigma: f64) -> f64 {
    gaussian_projection(k, sigma).1
}

/// Minimizes `f` on `[a, b]`; returns `(argmin, min)`. The bracket ends are
/// candidates too, so a monotone interval reports its edge.
fn golden_section(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let edges = [(a, f(a)), (b, f(b))];
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-12 * (a + b) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(mid, f(mid)), (c, fc), (d, fd)]
        .into_iter()
        .chain(edges)
        .fold(
            (mid, f64::INFINITY),
            |best, (s, v)| if v < best.1 { (s, v) } else { best },
        )
}
