//! Correlation, normalization and histogram entropy.

use crate::error::{Error, Result};
use crate::grid::{Image, Kernel};

/// Pearson correlation over all elements of two equal-shape grids.
pub fn corr2(a: impl AsRef<Image>, b: impl AsRef<Image>) -> Result<f64> {
    let (a, b) = (a.as_ref(), b.as_ref());
    a.check_same_shape(b)?;
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(Error::UndefinedCorrelation("first argument"));
    }
    if sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("second argument"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Subtracts the mean, then divides by the Frobenius norm.
pub fn normalize_zero_mean_unit_l2(k: &Kernel) -> Result<Kernel> {
    Ok(Kernel::try_from(normalize_image(k.as_image())?).expect("same shape"))
}

pub(crate) fn normalize_image(img: &Image) -> Result<Image> {
    let centered = img.offset(-img.mean());
    // re-center once more so the mean is zero to within rounding of the sum
    let centered = centered.offset(-centered.mean());
    let norm = centered.l2_norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateNormalization);
    }
    Ok(centered.scale(1.0 / norm))
}

pub const ENTROPY_BINS: usize = 256;

/// Shannon entropy (bits) of a 256-bin histogram spanning the image's own
/// `[min, max]`. A constant image has a single occupied bin and 0 bits.
pub fn entropy(image: &Image) -> f64 {
    let counts = histogram(image);
    let n = image.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Bin counts used by [`entropy`]: bin `⌊256·(v - min)/(max - min)⌋`, with
/// the maximum folded into the last bin.
pub fn histogram(image: &Image) -> [usize; ENTROPY_BINS] {
    let mut counts = [0usize; ENTROPY_BINS];
    let (lo, hi) = (image.min(), image.max());
    let range = hi - lo;
    if range <= 0.0 {
        counts[0] = image.len();
        return counts;
    }
    for &v in image.data() {
        let t = (v - lo) / range;
        let bin = ((t * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1);
        counts[bin] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_and_negated_correlation() {
        let a = Image::from_fn(4, 5, |r, c| (r as f64 * 1.3 - c as f64).sin());
        assert!((corr2(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((corr2(&a, a.scale(-1.0)).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn correlation_errors() {
        let a = Image::from_fn(3, 3, |r, c| (r + c) as f64);
        assert!(matches!(
            corr2(&a, Image::filled(3, 3, 1.0)),
            Err(Error::UndefinedCorrelation("second argument"))
        ));
        assert!(matches!(corr2(&a, Image::zeros(3, 4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn normalization_of_0_to_8() {
        let k = Kernel::new(3, (0..9).map(f64::from).collect()).unwrap();
        let n = normalize_zero_mean_unit_l2(&k).unwrap();
        // direct arithmetic: mean 4, centered values -4..4, norm sqrt(60)
        let norm = 60f64.sqrt();
        for (i, v) in n.data().iter().enumerate() {
            assert!((v - (i as f64 - 4.0) / norm).abs() < 1e-15);
        }
        assert!(n.sum().abs() < 1e-12);
        assert!((n.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_idempotent_and_affine_invariant() {
        let k = Kernel::from_fn(5, |i, j| ((i * 3 + j * 7) % 5) as f64 - 0.3 * i as f64).unwrap();
        let n = normalize_zero_mean_unit_l2(&k).unwrap();
        let nn = normalize_zero_mean_unit_l2(&n).unwrap();
        let affine =
            normalize_zero_mean_unit_l2(&Kernel::try_from(k.as_image().scale(3.5).offset(-2.0)).unwrap()).unwrap();
        for ((a, b), c) in n.data().iter().zip(nn.data()).zip(affine.data()) {
            assert!((a - b).abs() < 1e-12);
            assert!((a - c).abs() < 1e-12);
        }
        assert!(matches!(
            normalize_zero_mean_unit_l2(&Kernel::new(3, vec![2.0; 9]).unwrap()),
            Err(Error::DegenerateNormalization)
        ));
    }

    #[test]
    fn entropy_extremes() {
        assert_eq!(entropy(&Image::filled(10, 10, 0.7)), 0.0);
        let uniform = Image::from_fn(16, 16, |r, c| (r * 16 + c) as f64 / 255.0);
        assert!((entropy(&uniform) - 8.0).abs() < 1e-12);
        let two = Image::from_fn(4, 4, |r, _| if r < 2 { -1.0 } else { 1.0 });
        assert!((entropy(&two) - 1.0).abs() < 1e-15);
    }
}
