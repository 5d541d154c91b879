use std::fmt::Write as _;
use std::path::Path;

use super::tokens::Tokens;
use super::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::grid::{Image, Kernel};

/// `KMAT <rows> <cols>` followed by the row-major values. Values are written
/// with 17 significant digits, which round-trips every `f64` exactly.
pub fn encode_kmat(image: &Image, comments: &[&str]) -> String {
    let mut out = String::new();
    write_body(&mut out, image, comments);
    out
}

fn write_body(out: &mut String, image: &Image, comments: &[&str]) {
    let _ = writeln!(out, "KMAT {} {}", image.rows(), image.cols());
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for r in 0..image.rows() {
        let line: Vec<String> = image.row(r).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn parse_kmat(bytes: &[u8]) -> Result<Image> {
    let mut tokens = Tokens::new(bytes);
    let (offset, tag) = tokens.expect("KMAT header")?;
    if tag != "KMAT" {
        return Err(Error::parse(offset, format!("expected KMAT header, found {tag:?}")));
    }
    let image = parse_body(&mut tokens)?;
    if let Some((offset, tok)) = tokens.next() {
        return Err(Error::parse(offset, format!("trailing data {tok:?} after matrix")));
    }
    Ok(image)
}

/// Parses a KMAT file that must describe a square, odd-sided kernel.
pub fn parse_kernel(bytes: &[u8]) -> Result<Kernel> {
    let image = parse_kmat(bytes)?;
    as_kernel(image, header_dims_offset(bytes))
}

fn header_dims_offset(bytes: &[u8]) -> usize {
    let mut t = Tokens::new(bytes);
    t.next();
    t.next().map(|(o, _)| o).unwrap_or(0)
}

fn as_kernel(image: Image, offset: usize) -> Result<Kernel> {
    if image.rows() != image.cols() || image.rows().is_multiple_of(2) {
        return Err(Error::parse(
            offset,
            format!(
                "a kernel needs an odd square grid, found {}x{}",
                image.rows(),
                image.cols()
            ),
        ));
    }
    Ok(Kernel::try_from(image).expect("checked"))
}

/// Reads rows, cols and the values; the `KMAT` tag is already consumed.
fn parse_body(tokens: &mut Tokens<'_>) -> Result<Image> {
    let (_, rows) = tokens.expect_usize("row count")?;
    let (offset, cols) = tokens.expect_usize("column count")?;
    if rows == 0 || cols == 0 {
        return Err(Error::parse(offset, format!("empty {rows}x{cols} matrix")));
    }
    let n = rows * cols;
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        match tokens.next() {
            Some((offset, tok)) => match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::parse(
                        offset,
                        format!("value {i} of {n}: expected a finite number, found {tok:?}"),
                    ))
                }
            },
            None => {
                return Err(Error::parse(
                    tokens.pos(),
                    format!("truncated matrix: expected {n} values, found {i}"),
                ))
            }
        }
    }
    Ok(Image::new(rows, cols, data).expect("validated"))
}

/// A tagged sequence of KMAT bodies, e.g. `KBANK <count> <side>` or
/// `TOYMODEL 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct KmatList {
    pub tag: String,
    pub args: Vec<String>,
    pub items: Vec<Image>,
    /// Byte offset of each item's `KMAT` tag.
    pub offsets: Vec<usize>,
}

pub fn parse_kmat_list(bytes: &[u8], expected_tag: &str) -> Result<KmatList> {
    let mut tokens = Tokens::new(bytes);
    let (offset, tag) = tokens.expect(expected_tag)?;
    if tag != expected_tag {
        return Err(Error::parse(
            offset,
            format!("expected {expected_tag} header, found {tag:?}"),
        ));
    }
    let mut list = KmatList {
        tag: tag.to_string(),
        args: Vec::new(),
        items: Vec::new(),
        offsets: Vec::new(),
    };
    while let Some((offset, tok)) = tokens.next() {
        if tok == "KMAT" {
            list.offsets.push(offset);
            list.items.push(parse_body(&mut tokens)?);
        } else if list.items.is_empty() {
            list.args.push(tok.to_string());
        } else {
            return Err(Error::parse(offset, format!("expected KMAT, found {tok:?}")));
        }
    }
    Ok(list)
}

pub fn encode_kmat_list(tag: &str, args: &[String], items: &[(&str, &Image)]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{tag}");
    for a in args {
        let _ = write!(out, " {a}");
    }
    out.push('\n');
    for (label, image) in items {
        let comments: Vec<&str> = if label.is_empty() { vec![] } else { vec![*label] };
        write_body(&mut out, image, &comments);
    }
    out
}

pub fn load_kmat(path: impl AsRef<Path>) -> Result<Image> {
    parse_kmat(&read_bytes(path.as_ref())?)
}

pub fn save_kmat(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    write_bytes(path.as_ref(), encode_kmat(image, &[]).as_bytes())
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<Kernel> {
    parse_kernel(&read_bytes(path.as_ref())?)
}

pub fn save_kernel(path: impl AsRef<Path>, kernel: &Kernel) -> Result<()> {
    save_kmat(path, kernel.as_image())
}

pub(crate) fn list_item_as_kernel(list: &KmatList, index: usize) -> Result<Kernel> {
    as_kernel(list.items[index].clone(), list.offsets[index])
}
