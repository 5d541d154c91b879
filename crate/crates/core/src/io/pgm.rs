use std::path::Path;

use super::tokens::Tokens;
use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::grid::Image;

/// How an [`Image`] is quantized into a PGM file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgmOptions {
    pub maxval: u16,
    /// `P5` when true, `P2` otherwise.
    pub binary: bool,
    /// Values mapped affinely onto `[0, maxval]`; stored as `# range lo hi`.
    pub range: (f64, f64),
}

impl Default for PgmOptions {
    fn default() -> Self {
        Self {
            maxval: 255,
            binary: true,
            range: (0.0, 1.0),
        }
    }
}

impl PgmOptions {
    /// The `[-1, 1]` mapping used for signed Retinex stimuli.
    pub fn signed() -> Self {
        Self {
            range: (-1.0, 1.0),
            ..Self::default()
        }
    }
}

/// Encodes with clamping to the declared range.
pub fn encode_pgm(image: &Image, opts: &PgmOptions) -> Result<Vec<u8>> {
    let (lo, hi) = opts.range;
    if opts.maxval == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Argument(format!(
            "invalid PGM maxval {} or range [{lo}, {hi}]",
            opts.maxval
        )));
    }
    let magic = if opts.binary { "P5" } else { "P2" };
    let mut out = format!(
        "{magic}\n# range {lo:?} {hi:?}\n{} {}\n{}\n",
        image.cols(),
        image.rows(),
        opts.maxval
    )
    .into_bytes();
    let maxval = f64::from(opts.maxval);
    let quantize = |v: f64| (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * maxval).round() as u16;
    if opts.binary {
        for &v in image.data() {
            let q = quantize(v);
            if opts.maxval > 255 {
                out.extend_from_slice(&q.to_be_bytes());
            } else {
                out.push(q as u8);
            }
        }
    } else {
        for r in 0..image.rows() {
            let line: Vec<String> = image.row(r).iter().map(|&v| quantize(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    Ok(out)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let mut tokens = Tokens::new(bytes);
    let mut range = None;
    let mut on_comment = |c: &str| {
        if let Some(r) = parse_range_comment(c) {
            range = Some(r);
        }
    };
    let (offset, magic) = tokens
        .next_with(&mut on_comment)
        .ok_or_else(|| Error::parse(0, "empty PGM file"))?;
    let binary = match magic {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::parse(offset, format!("unsupported PGM magic {other:?}"))),
    };
    let mut header = [0usize; 3];
    for (slot, what) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let (offset, tok) = tokens
            .next_with(&mut on_comment)
            .ok_or_else(|| Error::parse(bytes.len(), format!("unexpected end of header, expected {what}")))?;
        *slot = tok
            .parse()
            .map_err(|_| Error::parse(offset, format!("expected {what}, found {tok:?}")))?;
    }
    let [cols, rows, maxval] = header;
    if cols == 0 || rows == 0 {
        return Err(Error::parse(0, format!("empty {cols}x{rows} image")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(0, format!("maxval {maxval} outside 1..=65535")));
    }
    let (lo, hi) = range.unwrap_or((0.0, 1.0));
    let n = rows * cols;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        tokens.advance(1);
        let start = tokens.pos();
        let width = if maxval > 255 { 2 } else { 1 };
        let payload = tokens.rest();
        if payload.len() < n * width {
            return Err(Error::parse(
                start,
                format!(
                    "truncated P5 payload: expected {} bytes, found {}",
                    n * width,
                    payload.len()
                ),
            ));
        }
        for i in 0..n {
            let q = if width == 2 {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as usize
            } else {
                payload[i] as usize
            };
            if q > maxval {
                return Err(Error::parse(
                    start + i * width,
                    format!("sample {q} exceeds maxval {maxval}"),
                ));
            }
            data.push(lo + (hi - lo) * (q as f64 / maxval as f64));
        }
    } else {
        for i in 0..n {
            let (offset, tok) = tokens.next().ok_or_else(|| {
                Error::parse(
                    bytes.len(),
                    format!("truncated P2 payload: expected {n} samples, found {i}"),
                )
            })?;
            let q: usize = tok
                .parse()
                .map_err(|_| Error::parse(offset, format!("expected a sample, found {tok:?}")))?;
            if q > maxval {
                return Err(Error::parse(offset, format!("sample {q} exceeds maxval {maxval}")));
            }
            data.push(lo + (hi - lo) * (q as f64 / maxval as f64));
        }
    }
    Image::new(rows, cols, data)
}

fn parse_range_comment(comment: &str) -> Option<(f64, f64)> {
    let mut parts = comment.split_whitespace();
    if parts.next()? != "range" {
        return None;
    }
    let lo: f64 = parts.next()?.parse().ok()?;
    let hi: f64 = parts.next()?.parse().ok()?;
    (hi > lo && lo.is_finite() && hi.is_finite()).then_some((lo, hi))
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    parse_pgm(&read_bytes(path.as_ref())?)
}

pub fn save_pgm(path: impl AsRef<Path>, image: &Image, opts: &PgmOptions) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(image, opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eight_bit() -> Image {
        Image::from_fn(5, 7, |r, c| ((r * 37 + c * 11) % 256) as f64 / 255.0)
    }

    #[test]
    fn p5_and_p2_round_trip_8_bit_images() {
        let img = eight_bit();
        for binary in [true, false] {
            let opts = PgmOptions {
                binary,
                ..PgmOptions::default()
            };
            let back = parse_pgm(&encode_pgm(&img, &opts).unwrap()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn sixteen_bit_and_signed_range() {
        let img = Image::from_fn(3, 4, |r, c| ((r * 4 + c) as f64 / 11.0) * 2.0 - 1.0);
        let opts = PgmOptions {
            maxval: 65535,
            ..PgmOptions::signed()
        };
        let bytes = encode_pgm(&img, &opts).unwrap();
        assert!(bytes.starts_with(b"P5\n# range -1.0 1.0\n4 3\n65535\n"));
        let back = parse_pgm(&bytes).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 65535.0);
        }
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        let mut bytes = encode_pgm(&eight_bit(), &PgmOptions::default()).unwrap();
        bytes.truncate(bytes.len() - 5);
        match parse_pgm(&bytes) {
            Err(Error::Parse { detail, .. }) => {
                assert!(detail.contains("expected 35 bytes, found 30"), "{detail}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_headers() {
        assert!(matches!(
            parse_pgm(b"P6\n1 1\n255\n\0"),
            Err(Error::Parse { offset: 0, .. })
        ));
        assert!(matches!(
            parse_pgm(b"P2\n2 x\n255\n"),
            Err(Error::Parse { offset: 5, .. })
        ));
        assert!(matches!(
            parse_pgm(b"P2\n2 1\n3\n1 4"),
            Err(Error::Parse { offset: 11, .. })
        ));
        assert!(parse_pgm(b"").is_err());
    }

    #[test]
    fn values_outside_range_are_clamped() {
        let img = Image::new(1, 3, vec![-2.0, 0.0, 3.0]).unwrap();
        let back = parse_pgm(&encode_pgm(&img, &PgmOptions::signed()).unwrap()).unwrap();
        assert_eq!(back.get(0, 0), -1.0);
        assert_eq!(back.get(0, 2), 1.0);
    }
}
