//! IDX files and the digit-versus-clothing dataset.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::io::read_bytes;

pub const DIGIT: u8 = 0;
pub const CLOTH: u8 = 1;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX payload.
#[derive(Clone, Debug, PartialEq)]
pub enum Idx {
    /// Pixels scaled by 1/255.
    Images(Vec<Image>),
    Labels(Vec<u8>),
}

pub fn parse_idx(bytes: &[u8]) -> Result<Idx> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::parse(bytes.len(), format!("truncated IDX header: {} bytes", bytes.len())))
    };
    match word(0)? {
        IMAGE_MAGIC => {
            let (count, rows, cols) = (word(1)? as usize, word(2)? as usize, word(3)? as usize);
            if rows == 0 || cols == 0 {
                return Err(Error::parse(8, format!("empty {rows}x{cols} IDX images")));
            }
            let need = count * rows * cols;
            let payload = &bytes[16..];
            if payload.len() != need {
                return Err(Error::parse(
                    16,
                    format!("IDX payload holds {} bytes, expected {need}", payload.len()),
                ));
            }
            let images = payload
                .chunks_exact(rows * cols)
                .map(|px| Image::from_raw(rows, cols, px.iter().map(|&b| f64::from(b) / 255.0).collect()))
                .collect();
            Ok(Idx::Images(images))
        }
        LABEL_MAGIC => {
            let count = word(1)? as usize;
            let payload = &bytes[8..];
            if payload.len() != count {
                return Err(Error::parse(
                    8,
                    format!("IDX payload holds {} labels, expected {count}", payload.len()),
                ));
            }
            Ok(Idx::Labels(payload.to_vec()))
        }
        other => Err(Error::parse(0, format!("unknown IDX magic {other:#010x}"))),
    }
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<Image>> {
    match parse_idx(&read_bytes(path.as_ref())?)? {
        Idx::Images(v) => Ok(v),
        Idx::Labels(_) => Err(Error::parse(0, "expected an IDX image file, found labels")),
    }
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    match parse_idx(&read_bytes(path.as_ref())?)? {
        Idx::Labels(v) => Ok(v),
        Idx::Images(_) => Err(Error::parse(0, "expected an IDX label file, found images")),
    }
}

/// The four image files the dataset is built from.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFiles {
    pub mnist_train: PathBuf,
    pub fashion_train: PathBuf,
    pub mnist_test: PathBuf,
    pub fashion_test: PathBuf,
}

impl DatasetFiles {
    /// `dir/{mnist,fashion}/{train,t10k}-images-idx3-ubyte`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        let f = |set: &str, split: &str| d.join(set).join(format!("{split}-images-idx3-ubyte"));
        Self {
            mnist_train: f("mnist", "train"),
            fashion_train: f("fashion", "train"),
            mnist_test: f("mnist", "t10k"),
            fashion_test: f("fashion", "t10k"),
        }
    }

    pub fn exist(&self) -> bool {
        [
            &self.mnist_train,
            &self.fashion_train,
            &self.mnist_test,
            &self.fashion_test,
        ]
        .iter()
        .all(|p| p.is_file())
    }

    /// Loads all four files and builds the standard train/test split.
    pub fn build(&self, seed: u64) -> Result<(BinaryDataset, BinaryDataset)> {
        build_binary_dataset(
            &load_idx_images(&self.mnist_train)?,
            &load_idx_images(&self.fashion_train)?,
            &load_idx_images(&self.mnist_test)?,
            &load_idx_images(&self.fashion_test)?,
            seed,
        )
    }
}

/// Images with labels [`DIGIT`] or [`CLOTH`].
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
}

impl BinaryDataset {
    pub fn new(images: Vec<Image>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} images paired with {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > CLOTH) {
            return Err(Error::Argument(format!("label {l} is not 0 or 1")));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// The first 30000 training and 5000 test images of each source.
pub fn build_binary_dataset(
    mnist_train: &[Image],
    fashion_train: &[Image],
    mnist_test: &[Image],
    fashion_test: &[Image],
    seed: u64,
) -> Result<(BinaryDataset, BinaryDataset)> {
    const TRAIN: usize = 60_000;
    const TEST: usize = 10_000;
    for (name, set, want) in [
        ("MNIST train", mnist_train, TRAIN),
        ("Fashion-MNIST train", fashion_train, TRAIN),
        ("MNIST test", mnist_test, TEST),
        ("Fashion-MNIST test", fashion_test, TEST),
    ] {
        if set.len() < want {
            return Err(Error::Argument(format!(
                "{name} has {} images, expected {want}",
                set.len()
            )));
        }
    }
    build_binary_dataset_with_sizes(
        mnist_train,
        fashion_train,
        mnist_test,
        fashion_test,
        TRAIN / 2,
        TEST / 2,
        seed,
    )
}

/// Takes the first `train_half` / `test_half` images of each source, labels
/// digits 0 and clothing 1, and shuffles each split with a seeded generator.
pub fn build_binary_dataset_with_sizes(
    mnist_train: &[Image],
    fashion_train: &[Image],
    mnist_test: &[Image],
    fashion_test: &[Image],
    train_half: usize,
    test_half: usize,
    seed: u64,
) -> Result<(BinaryDataset, BinaryDataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = |digits: &[Image], clothes: &[Image], half: usize| -> Result<BinaryDataset> {
        if digits.len() < half || clothes.len() < half {
            return Err(Error::Argument(format!(
                "need {half} images from each source, got {} and {}",
                digits.len(),
                clothes.len()
            )));
        }
        let mut pairs: Vec<(Image, u8)> = digits[..half]
            .iter()
            .map(|i| (i.clone(), DIGIT))
            .chain(clothes[..half].iter().map(|i| (i.clone(), CLOTH)))
            .collect();
        pairs.shuffle(&mut rng);
        let (images, labels) = pairs.into_iter().unzip();
        BinaryDataset::new(images, labels)
    };
    let train = split(mnist_train, fashion_train, train_half)?;
    let test = split(mnist_test, fashion_test, test_half)?;
    Ok((train, test))
}
