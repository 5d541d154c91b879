//! Dense row-major grids: [`Image`] for signals and [`Kernel`] for small
//! odd-sided convolution operators.

use std::ops::Index;

use crate::error::{Error, Result};

/// A finite `rows × cols` grid of `f64`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("image must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} image needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Caller guarantees a non-empty, correctly sized, finite buffer.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(rows > 0 && cols > 0);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "image must be non-empty");
        assert!(value.is_finite());
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    /// Builds an image by evaluating `f(row, col)`. Panics if `f` yields a
    /// non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                assert!(v.is_finite(), "non-finite value at ({r}, {c})");
                data.push(v);
            }
        }
        Self::from_raw(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Applies `f` elementwise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self::from_raw(self.rows, self.cols, data)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn offset(&self, delta: f64) -> Self {
        self.map(|v| v + delta)
    }

    /// `self + factor * other`, elementwise.
    pub fn add_scaled(&self, other: &Image, factor: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn sub(&self, other: &Image) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Copies the `rows × cols` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || top + rows > self.rows || left + cols > self.cols {
            return Err(Error::Dimension(format!(
                "crop {rows}x{cols} at ({top}, {left}) exceeds {}x{} image",
                self.rows, self.cols
            )));
        }
        Ok(Self::from_fn(rows, cols, |r, c| self.get(top + r, left + c)))
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape {}x{} does not match {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Image {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.data[row * self.cols + col]
    }
}

impl AsRef<Image> for Image {
    fn as_ref(&self) -> &Image {
        self
    }
}

/// A square grid with an odd side, centered at `((side-1)/2, (side-1)/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel(Image);

impl Kernel {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        check_odd_side(side)?;
        Ok(Self(Image::new(side, side, data)?))
    }

    pub fn from_fn(side: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_odd_side(side)?;
        Ok(Self(Image::from_fn(side, side, f)))
    }

    /// Builds a kernel from signed offsets `(dy, dx)` relative to the center.
    pub fn from_offsets(side: usize, mut f: impl FnMut(i64, i64) -> f64) -> Result<Self> {
        let half = half_side(side) as i64;
        Self::from_fn(side, |r, c| f(r as i64 - half, c as i64 - half))
    }

    pub fn zeros(side: usize) -> Result<Self> {
        Self::from_fn(side, |_, _| 0.0)
    }

    pub fn side(&self) -> usize {
        self.0.rows()
    }

    /// `(side - 1) / 2`
    pub fn half(&self) -> usize {
        half_side(self.side())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    /// Value at signed offset `(dy, dx)` from the center; zero outside the grid.
    pub fn at_offset(&self, dy: i64, dx: i64) -> f64 {
        let half = self.half() as i64;
        let (r, c) = (dy + half, dx + half);
        if r < 0 || c < 0 || r >= self.side() as i64 || c >= self.side() as i64 {
            0.0
        } else {
            self.get(r as usize, c as usize)
        }
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn as_image(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.scale(factor))
    }

    pub fn add_scaled(&self, other: &Kernel, factor: f64) -> Result<Self> {
        Ok(Self(self.0.add_scaled(&other.0, factor)?))
    }

    /// The kernel rotated by 180°, i.e. `K♭(x) = K(-x)`.
    pub fn flipped(&self) -> Self {
        let mut data = self.0.data().to_vec();
        data.reverse();
        Self(Image::from_raw(self.side(), self.side(), data))
    }

    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.l1_norm()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }
}

impl TryFrom<Image> for Kernel {
    type Error = Error;

    fn try_from(image: Image) -> Result<Self> {
        if image.rows() != image.cols() {
            return Err(Error::Dimension(format!(
                "kernel must be square, got {}x{}",
                image.rows(),
                image.cols()
            )));
        }
        check_odd_side(image.rows())?;
        Ok(Self(image))
    }
}

impl From<Kernel> for Image {
    fn from(k: Kernel) -> Image {
        k.0
    }
}

impl AsRef<Image> for Kernel {
    fn as_ref(&self) -> &Image {
        &self.0
    }
}

impl Index<(usize, usize)> for Kernel {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

pub(crate) fn check_odd_side(side: usize) -> Result<()> {
    if side.is_multiple_of(2) {
        return Err(Error::Argument(format!("kernel side must be odd, got {side}")));
    }
    Ok(())
}

pub(crate) fn half_side(side: usize) -> usize {
    (side.saturating_sub(1)) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_sizes() {
        assert!(matches!(
            Image::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]),
            Err(Error::NonFinite { index: 2 })
        ));
        assert!(matches!(Image::new(2, 2, vec![0.0; 3]), Err(Error::Dimension(_))));
        assert!(matches!(Image::new(0, 2, vec![]), Err(Error::Dimension(_))));
        assert!(matches!(Kernel::new(2, vec![0.0; 4]), Err(Error::Argument(_))));
    }

    #[test]
    fn kernel_offsets_and_flip() {
        let k = Kernel::from_offsets(3, |dy, dx| (3 * dy + dx) as f64).unwrap();
        assert_eq!(k.at_offset(0, 0), 0.0);
        assert_eq!(k.at_offset(-1, 1), -2.0);
        assert_eq!(k.at_offset(2, 0), 0.0);
        let f = k.flipped();
        assert_eq!(f.at_offset(1, -1), k.at_offset(-1, 1));
    }
}
