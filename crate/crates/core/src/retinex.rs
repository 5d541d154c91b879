//! Retinex reconstruction `Ĩ = (I ∗ m) ∗ M̃`, synthetic stimuli and probes.

use std::fmt::Write as _;

use crate::conv::{convolve_same, PaddingMode};
use crate::error::{Error, Result};
use crate::grid::{Image, Kernel};
use crate::inverse::{invert_kernel, InverseConfig, InverseResult};
use crate::metrics::entropy;
use crate::parallel;

/// `(row, col)` pixel position.
pub type Point = (usize, usize);

/// How the constant left undetermined by a zero-sum `m` is fixed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MeanPolicy {
    ZeroMean,
    /// Shift the reconstruction to the mean of the input.
    #[default]
    MatchInput,
}

/// Replicate padding is used for both convolutions.
pub fn retinex_reconstruct(i: &Image, m: &Kernel, m_tilde: &Kernel, policy: MeanPolicy) -> Result<Image> {
    let filtered = convolve_same(i, m, PaddingMode::Replicate)?;
    let recon = convolve_same(&filtered, m_tilde, PaddingMode::Replicate)?;
    let target = match policy {
        MeanPolicy::ZeroMean => 0.0,
        MeanPolicy::MatchInput => i.mean(),
    };
    let shifted = recon.offset(target - recon.mean());
    // one more correction absorbs the rounding of the first shift
    Ok(shifted.offset(target - shifted.mean()))
}

/// A horizontal ramp from +1 (first column) to −1 (last column) with two
/// discs of value 0.
pub fn gradient_circles_image(
    rows: usize,
    cols: usize,
    dot_radius: usize,
    left_center: Point,
    right_center: Point,
) -> Result<Image> {
    if rows == 0 || cols < 2 {
        return Err(Error::Argument(format!("stimulus {rows}x{cols} is too small")));
    }
    for (name, (r, c)) in [("left", left_center), ("right", right_center)] {
        if r < dot_radius || c < dot_radius || r + dot_radius >= rows || c + dot_radius >= cols {
            return Err(Error::Argument(format!(
                "{name} dot of radius {dot_radius} at ({r}, {c}) leaves the {rows}x{cols} grid"
            )));
        }
    }
    let dist2 = |a: Point, b: Point| {
        let dr = a.0 as f64 - b.0 as f64;
        let dc = a.1 as f64 - b.1 as f64;
        dr * dr + dc * dc
    };
    let rad2 = (dot_radius * dot_radius) as f64;
    if dist2(left_center, right_center) <= 4.0 * rad2 {
        return Err(Error::Argument("the two dots overlap".into()));
    }
    Ok(Image::from_fn(rows, cols, |r, c| {
        if dist2((r, c), left_center) <= rad2 || dist2((r, c), right_center) <= rad2 {
            0.0
        } else {
            1.0 - 2.0 * c as f64 / (cols - 1) as f64
        }
    }))
}

/// The layout used by the circles experiment: a 128×256 ramp with radius-10
/// dots a quarter of the way in from each side, mirror images of each other.
pub fn standard_circles() -> (Image, Point, Point) {
    let (rows, cols) = (128, 256);
    let left = (rows / 2, 32);
    let right = (rows / 2, cols - 1 - 32);
    let img = gradient_circles_image(rows, cols, 10, left, right).expect("valid layout");
    (img, left, right)
}

/// Mean over the `(2h+1)²` window centered at `center`.
pub fn probe(image: &Image, center: Point, half_window: usize) -> Result<f64> {
    let (r, c) = center;
    if r < half_window || c < half_window || r + half_window >= image.rows() || c + half_window >= image.cols() {
        return Err(Error::Argument(format!(
            "probe window of half-size {half_window} at ({r}, {c}) leaves the {}x{} image",
            image.rows(),
            image.cols()
        )));
    }
    let side = 2 * half_window + 1;
    let window = image.crop(r - half_window, c - half_window, side, side)?;
    Ok(window.mean())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeValue {
    pub label: String,
    pub center: Point,
    pub half_window: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetinexReport {
    pub reconstruction: Image,
    pub probes: Vec<ProbeValue>,
}

impl RetinexReport {
    /// `label,before,after` lines.
    pub fn probe_csv(&self) -> String {
        let mut out = String::from("label,before,after\n");
        for p in &self.probes {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", p.label, p.before, p.after);
        }
        out
    }
}

/// Reconstructs `image` and probes it at each labelled point.
pub fn probe_report(
    image: &Image,
    m: &Kernel,
    m_tilde: &Kernel,
    policy: MeanPolicy,
    points: &[(&str, Point)],
    half_window: usize,
) -> Result<RetinexReport> {
    let reconstruction = retinex_reconstruct(image, m, m_tilde, policy)?;
    let probes = points
        .iter()
        .map(|&(label, center)| {
            Ok(ProbeValue {
                label: label.to_string(),
                center,
                half_window,
                before: probe(image, center, half_window)?,
                after: probe(&reconstruction, center, half_window)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RetinexReport { reconstruction, probes })
}

pub const ADELSON_HALF_WINDOW: usize = 2;

/// Inverts `m`, reconstructs with [`MeanPolicy::MatchInput`] and reports the
/// values at squares `A` and `B`.
pub fn adelson_probe(
    image: &Image,
    a_center: Point,
    b_center: Point,
    m: &Kernel,
    cfg: &InverseConfig,
) -> Result<(RetinexReport, InverseResult)> {
    let inverse = invert_kernel(m, cfg)?;
    let report = probe_report(
        image,
        m,
        &inverse.m_tilde,
        MeanPolicy::MatchInput,
        &[("A", a_center), ("B", b_center)],
        ADELSON_HALF_WINDOW,
    )?;
    Ok((report, inverse))
}

/// A 160×160 checkerboard of 16-pixel squares under a soft circular shadow.
///
/// Returns the image with the centers of `A`, a dark square in the open whose
/// neighbours are light, and `B`, a light square inside the shadow whose
/// neighbours are dark. Both have the value −0.2.
pub fn shadowed_checker() -> (Image, Point, Point) {
    const SQUARE: usize = 16;
    const N: usize = 10;
    let (light, dark, shadow) = (0.6, -0.2, 0.8);
    let a = (2 * SQUARE + SQUARE / 2, 3 * SQUARE + SQUARE / 2);
    let b = (7 * SQUARE + SQUARE / 2, 7 * SQUARE + SQUARE / 2);
    let (radius, soft) = (40.0, 12.0);
    let img = Image::from_fn(N * SQUARE, N * SQUARE, |r, c| {
        let base = if (r / SQUARE + c / SQUARE).is_multiple_of(2) {
            light
        } else {
            dark
        };
        let dr = r as f64 - b.0 as f64;
        let dc = c as f64 - b.1 as f64;
        let t = (((dr * dr + dc * dc).sqrt() - radius) / soft).clamp(0.0, 1.0);
        let smooth = t * t * (3.0 - 2.0 * t);
        base - shadow * (1.0 - smooth)
    });
    (img, a, b)
}

/// Mean entropies of the originals, of `I ∗ m`, and of the reconstructions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyMeans {
    pub original: f64,
    pub convolved: f64,
    pub reconstructed: f64,
}

pub fn entropy_pipeline(images: &[Image], m: &Kernel, cfg: &InverseConfig) -> Result<EntropyMeans> {
    if images.is_empty() {
        return Err(Error::Argument("entropy pipeline needs at least one image".into()));
    }
    let inverse = invert_kernel(m, cfg)?;
    let rows = parallel::map(images, |img| -> Result<[f64; 3]> {
        let conv = convolve_same(img, m, PaddingMode::Replicate)?;
        let recon = retinex_reconstruct(img, m, &inverse.m_tilde, MeanPolicy::MatchInput)?;
        Ok([entropy(img), entropy(&conv), entropy(&recon)])
    });
    let mut sums = [0.0; 3];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row?) {
            *s += v;
        }
    }
    let n = images.len() as f64;
    Ok(EntropyMeans {
        original: sums[0] / n,
        convolved: sums[1] / n,
        reconstructed: sums[2] / n,
    })
}
