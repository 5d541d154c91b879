//! File formats: binary/ASCII PGM images and the plain-text KMAT matrix
//! format (plus the KBANK and TOYMODEL lists built from KMAT bodies).

mod kmat;
mod pgm;
mod tokens;

use std::fs;
use std::path::{Path, PathBuf};

pub(crate) use kmat::list_item_as_kernel;
pub use kmat::{
    encode_kmat, encode_kmat_list, load_kernel, load_kmat, parse_kernel, parse_kmat, parse_kmat_list, save_kernel,
    save_kmat, KmatList,
};
pub use pgm::{encode_pgm, load_pgm, parse_pgm, save_pgm, PgmOptions};

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Files in `dir` with the given extension (case-insensitive), sorted by name.
pub fn list_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(extension));
        if path.is_file() && matches {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
