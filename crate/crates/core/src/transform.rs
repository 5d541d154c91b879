//! Geometric resampling: rotation about the grid center and rescaling.

use crate::error::{Error, Result};
use crate::grid::Image;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// Rotates counterclockwise (as displayed, rows growing downward) by
/// `degrees` about `((rows-1)/2, (cols-1)/2)`.
///
/// Output keeps the input dimensions. Samples falling outside the source take
/// `fill`; bilinear interpolation treats out-of-range neighbours as `fill`.
/// Multiples of 90° use exact trigonometric values, so nearest-neighbour
/// rotation by them is a pure pixel permutation on square grids.
pub fn rotate(image: &Image, degrees: f64, method: Interpolation, fill: f64) -> Image {
    let turns = degrees.rem_euclid(360.0);
    if turns == 0.0 {
        return image.clone();
    }
    let (sin, cos) = exact_sin_cos(turns);
    let (rows, cols) = image.shape();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    Image::from_fn(rows, cols, |r, c| {
        let (xd, yd) = (c as f64 - cx, r as f64 - cy);
        let xs = cos * xd - sin * yd + cx;
        let ys = sin * xd + cos * yd + cy;
        match method {
            Interpolation::Nearest => sample_nearest(image, ys, xs, fill),
            Interpolation::Bilinear => sample_bilinear(image, ys, xs, fill),
        }
    })
}

/// Rescales by `scale`; the output is `⌈scale·rows⌉ × ⌈scale·cols⌉`.
///
/// Pixel centers are aligned (`src = (dst + 0.5) / scale - 0.5`) and edges
/// are replicated, so unit scale is the identity and constants stay constant.
pub fn resize(image: &Image, scale: f64, method: Interpolation) -> Result<Image> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Argument(format!("scale must be positive, got {scale}")));
    }
    let (rows, cols) = image.shape();
    let out_dim = |n: usize| (scale * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let (orows, ocols) = (out_dim(rows), out_dim(cols));
    if orows == 0 || ocols == 0 {
        return Err(Error::Argument(format!(
            "scale {scale} collapses a {rows}x{cols} image"
        )));
    }
    let inv = 1.0 / scale;
    // an axis whose length is unchanged maps straight through
    let src_coord = |d: usize, n: usize, on: usize| {
        if on == n {
            d as f64
        } else {
            (d as f64 + 0.5) * inv - 0.5
        }
    };
    Ok(Image::from_fn(orows, ocols, |r, c| {
        let ys = src_coord(r, rows, orows).clamp(0.0, rows as f64 - 1.0);
        let xs = src_coord(c, cols, ocols).clamp(0.0, cols as f64 - 1.0);
        match method {
            Interpolation::Nearest => {
                let yr = (ys + 0.5).floor().min(rows as f64 - 1.0) as usize;
                let xr = (xs + 0.5).floor().min(cols as f64 - 1.0) as usize;
                image.get(yr, xr)
            }
            Interpolation::Bilinear => sample_bilinear(image, ys, xs, 0.0),
        }
    }))
}

fn exact_sin_cos(degrees: f64) -> (f64, f64) {
    if degrees == 90.0 {
        (1.0, 0.0)
    } else if degrees == 180.0 {
        (0.0, -1.0)
    } else if degrees == 270.0 {
        (-1.0, 0.0)
    } else {
        degrees.to_radians().sin_cos()
    }
}

fn pixel_or(image: &Image, r: i64, c: i64, fill: f64) -> f64 {
    if r < 0 || c < 0 || r >= image.rows() as i64 || c >= image.cols() as i64 {
        fill
    } else {
        image.get(r as usize, c as usize)
    }
}

fn sample_nearest(image: &Image, y: f64, x: f64, fill: f64) -> f64 {
    pixel_or(image, (y + 0.5).floor() as i64, (x + 0.5).floor() as i64, fill)
}

fn sample_bilinear(image: &Image, y: f64, x: f64, fill: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (ty, tx) = (y - y0, x - x0);
    let (r, c) = (y0 as i64, x0 as i64);
    if r < -1 || c < -1 || r >= image.rows() as i64 || c >= image.cols() as i64 {
        return fill;
    }
    let mut acc = 0.0;
    for (dr, wy) in [(0, 1.0 - ty), (1, ty)] {
        if wy == 0.0 {
            continue;
        }
        for (dc, wx) in [(0, 1.0 - tx), (1, tx)] {
            if wx == 0.0 {
                continue;
            }
            acc += wy * wx * pixel_or(image, r + dr, c + dc, fill);
        }
    }
    acc
}
