//! Direct 2D convolution. Every routine here is a true convolution: the
//! kernel is flipped relative to cross-correlation.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::{check_odd_side, Image, Kernel};

/// How samples outside the image are synthesized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PaddingMode {
    /// Out-of-range samples are 0.
    #[default]
    Zero,
    /// Out-of-range samples repeat the nearest edge pixel.
    Replicate,
}

/// Convolves `image` with `kernel`, keeping the image dimensions.
///
/// `out[r][c] = Σ K[i][j] · I[r + h - i][c + h - j]` with `h = (side - 1) / 2`.
/// Convolving a rotated input with a kernel rotated by 90, 180 or 270 degrees
/// reproduces the rotated output exactly on interior pixels.
pub fn convolve_same(image: &Image, kernel: &Kernel, pad: PaddingMode) -> Result<Image> {
    let (rows, cols) = image.shape();
    let side = kernel.side();
    if side > rows.min(cols) {
        return Err(Error::Dimension(format!(
            "{side}x{side} kernel is larger than {rows}x{cols} image"
        )));
    }
    let h = kernel.half();
    let padded = pad_image(image, h, pad);
    let pcols = cols + 2 * h;
    // Sample of the padded image for kernel offset (u, v) from the centre.
    let row = |u: i64, v: i64, r: usize| {
        let start = (r as i64 + h as i64 - u) as usize * pcols + (h as i64 - v) as usize;
        &padded[start..start + cols]
    };
    let w = |u: i64, v: i64| kernel.get((h as i64 + u) as usize, (h as i64 + v) as usize);
    let mut out = vec![0.0; rows * cols];
    let w0 = w(0, 0);
    for r in 0..rows {
        for (o, s) in out[r * cols..(r + 1) * cols].iter_mut().zip(row(0, 0, r)) {
            *o = w0 * s;
        }
    }
    // Off-centre offsets are summed one quarter-turn orbit {o, -o, p, -p} at a
    // time as (t(o) + t(-o)) + (t(p) + t(-p)). Rotating the kernel by a
    // multiple of 90 degrees only permutes terms within that expression, so
    // convolution commutes with lattice rotations bit for bit.
    let h = h as i64;
    for a in 1..=h {
        for b in 0..=h {
            let offs = [(a, b), (-a, -b), (-b, a), (b, -a)];
            let ws = offs.map(|(u, v)| w(u, v));
            if ws.iter().all(|&x| x == 0.0) {
                continue;
            }
            for r in 0..rows {
                let s = offs.map(|(u, v)| row(u, v, r));
                for (i, o) in out[r * cols..(r + 1) * cols].iter_mut().enumerate() {
                    *o += (ws[0] * s[0][i] + ws[1] * s[1][i]) + (ws[2] * s[2][i] + ws[3] * s[3][i]);
                }
            }
        }
    }
    Ok(Image::from_raw(rows, cols, out))
}

/// Valid-mode convolution: only positions where the kernel fully overlaps the
/// image. An `n × m` image and `s × s` kernel yield `(n-s+1) × (m-s+1)`.
pub fn convolve_valid(image: &Image, kernel: &Kernel) -> Result<Image> {
    let (rows, cols) = image.shape();
    let side = kernel.side();
    if side > rows.min(cols) {
        return Err(Error::Dimension(format!(
            "{side}x{side} kernel is larger than {rows}x{cols} image"
        )));
    }
    let (orows, ocols) = (rows - side + 1, cols - side + 1);
    let src = image.data();
    let mut out = vec![0.0; orows * ocols];
    for i in 0..side {
        for j in 0..side {
            let w = kernel.get(i, j);
            let (dr, dc) = (side - 1 - i, side - 1 - j);
            for r in 0..orows {
                let s = &src[(r + dr) * cols + dc..(r + dr) * cols + dc + ocols];
                let d = &mut out[r * ocols..(r + 1) * ocols];
                for (o, v) in d.iter_mut().zip(s) {
                    *o += w * v;
                }
            }
        }
    }
    Ok(Image::from_raw(orows, ocols, out))
}

/// Central `out_side × out_side` crop of the full discrete convolution `a ∗ b`.
///
/// Offsets beyond the full support are zero. The operand that drives the outer
/// loop is chosen independently of argument order, so
/// `kernel_convolve(a, b, s) == kernel_convolve(b, a, s)` bit for bit.
pub fn kernel_convolve(a: &Kernel, b: &Kernel, out_side: usize) -> Result<Kernel> {
    if out_side == 0 {
        return Err(Error::Argument("output side must be at least 1".into()));
    }
    check_odd_side(out_side)?;
    let (outer, inner) = if canonical_order(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    Ok(Kernel::new(out_side, convolve_cropped(outer, inner, out_side)).expect("finite"))
}

/// Hot loop behind [`kernel_convolve`]; `outer` drives the shift-and-add.
pub(crate) fn convolve_cropped(outer: &Kernel, inner: &Kernel, out_side: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_side * out_side];
    convolve_cropped_into(outer, inner.data(), inner.side(), &mut out, out_side);
    out
}

/// As [`convolve_cropped`], overwriting `out` (`out_side²` long) with the
/// result for an `inner_side²` row-major `inner` grid.
pub(crate) fn convolve_cropped_into(
    outer: &Kernel,
    inner: &[f64],
    inner_side: usize,
    out: &mut [f64],
    out_side: usize,
) {
    debug_assert_eq!(inner.len(), inner_side * inner_side);
    debug_assert_eq!(out.len(), out_side * out_side);
    out.fill(0.0);
    let ho = (out_side / 2) as i64;
    let hi = (inner_side / 2) as i64;
    let ha = outer.half() as i64;
    for py in -ha..=ha {
        for px in -ha..=ha {
            let w = outer.at_offset(py, px);
            if w == 0.0 {
                continue;
            }
            // output offset d needs inner offset d - p inside [-hi, hi]
            let dy0 = (py - hi).max(-ho);
            let dy1 = (py + hi).min(ho);
            let dx0 = (px - hi).max(-ho);
            let dx1 = (px + hi).min(ho);
            if dy0 > dy1 || dx0 > dx1 {
                continue;
            }
            let width = (dx1 - dx0 + 1) as usize;
            for dy in dy0..=dy1 {
                let orow = (dy + ho) as usize * out_side + (dx0 + ho) as usize;
                let irow = (dy - py + hi) as usize * inner_side + (dx0 - px + hi) as usize;
                let dst = &mut out[orow..orow + width];
                let src = &inner[irow..irow + width];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
    }
}

fn canonical_order(a: &Kernel, b: &Kernel) -> Ordering {
    a.side().cmp(&b.side()).then_with(|| {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn pad_image(image: &Image, h: usize, pad: PaddingMode) -> Vec<f64> {
    let (rows, cols) = image.shape();
    let (prows, pcols) = (rows + 2 * h, cols + 2 * h);
    let mut out = vec![0.0; prows * pcols];
    for pr in 0..prows {
        let r = pr as i64 - h as i64;
        for pc in 0..pcols {
            let c = pc as i64 - h as i64;
            let inside = r >= 0 && c >= 0 && r < rows as i64 && c < cols as i64;
            out[pr * pcols + pc] = match (inside, pad) {
                (true, _) => image.get(r as usize, c as usize),
                (false, PaddingMode::Zero) => 0.0,
                (false, PaddingMode::Replicate) => image.get(
                    r.clamp(0, rows as i64 - 1) as usize,
                    c.clamp(0, cols as i64 - 1) as usize,
                ),
            };
        }
    }
    out
}
