//! A one-filter classifier: 13×13 valid convolution, ReLU, a fully
//! connected layer to two logits, softmax. Gradients are written out by hand.

mod data;
mod train;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conv::convolve_valid;
use crate::error::{Error, Result};
use crate::grid::{Image, Kernel};
use crate::io::{encode_kmat_list, parse_kmat_list, read_bytes, write_bytes};

pub use data::{
    build_binary_dataset, build_binary_dataset_with_sizes, load_idx_images, load_idx_labels, parse_idx, BinaryDataset,
    DatasetFiles, Idx, CLOTH, DIGIT,
};
pub use train::{analyze_psi0, evaluate, train, train_with_progress, Psi0Analysis, TrainConfig, TrainReport};

pub const INPUT_SIDE: usize = 28;
pub const FILTER_SIDE: usize = 13;
pub const FEATURE_SIDE: usize = INPUT_SIDE - FILTER_SIDE + 1;
pub const FEATURE_LEN: usize = FEATURE_SIDE * FEATURE_SIDE;
pub const CLASSES: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub psi0: Kernel,
    pub conv_bias: f64,
    /// `CLASSES × FEATURE_LEN`, row `z` feeding logit `z`.
    pub fc_weights: Image,
    pub fc_bias: [f64; CLASSES],
}

/// Intermediate values kept by [`forward`] for [`backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct Cache {
    /// Convolution output plus bias, before the ReLU.
    pub pre_activation: Vec<f64>,
    pub activation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub logits: [f64; CLASSES],
    pub probabilities: [f64; CLASSES],
    pub cache: Cache,
}

/// Parameter-shaped gradient (or velocity) buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub psi0: Vec<f64>,
    pub conv_bias: f64,
    pub fc_weights: Vec<f64>,
    pub fc_bias: [f64; CLASSES],
}

impl Gradients {
    pub fn zeros() -> Self {
        Self {
            psi0: vec![0.0; FILTER_SIDE * FILTER_SIDE],
            conv_bias: 0.0,
            fc_weights: vec![0.0; CLASSES * FEATURE_LEN],
            fc_bias: [0.0; CLASSES],
        }
    }

    /// `self += other`, element by element.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.psi0.iter_mut().zip(&other.psi0) {
            *a += b;
        }
        self.conv_bias += other.conv_bias;
        for (a, b) in self.fc_weights.iter_mut().zip(&other.fc_weights) {
            *a += b;
        }
        for (a, b) in self.fc_bias.iter_mut().zip(&other.fc_bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.psi0.iter_mut().for_each(|v| *v *= factor);
        self.conv_bias *= factor;
        self.fc_weights.iter_mut().for_each(|v| *v *= factor);
        self.fc_bias.iter_mut().for_each(|v| *v *= factor);
    }
}

impl ToyModel {
    /// `psi0 ~ U(-1/13, 1/13)`, `fc_weights ~ U(-1/16, 1/16)`, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 1.0 / FILTER_SIDE as f64;
        let psi0 = Kernel::from_fn(FILTER_SIDE, |_, _| rng.gen_range(-a..a)).expect("finite");
        let b = 1.0 / (FEATURE_LEN as f64).sqrt();
        let fc_weights = Image::from_fn(CLASSES, FEATURE_LEN, |_, _| rng.gen_range(-b..b));
        Self {
            psi0,
            conv_bias: 0.0,
            fc_weights,
            fc_bias: [0.0; CLASSES],
        }
    }

    pub fn zeros() -> Self {
        Self {
            psi0: Kernel::zeros(FILTER_SIDE).expect("odd"),
            conv_bias: 0.0,
            fc_weights: Image::zeros(CLASSES, FEATURE_LEN),
            fc_bias: [0.0; CLASSES],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.psi0.side() != FILTER_SIDE {
            return Err(Error::Dimension(format!(
                "psi0 must be {FILTER_SIDE}x{FILTER_SIDE}, got {0}x{0}",
                self.psi0.side()
            )));
        }
        if self.fc_weights.shape() != (CLASSES, FEATURE_LEN) {
            return Err(Error::Dimension(format!(
                "fc weights must be {CLASSES}x{FEATURE_LEN}, got {:?}",
                self.fc_weights.shape()
            )));
        }
        if !self.conv_bias.is_finite() || self.fc_bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Argument("biases must be finite".into()));
        }
        Ok(())
    }

    /// Applies `θ ← θ + step` to every parameter.
    pub(crate) fn apply(&mut self, step: &Gradients) -> Result<()> {
        let psi0: Vec<f64> = self.psi0.data().iter().zip(&step.psi0).map(|(a, b)| a + b).collect();
        self.psi0 = Kernel::new(FILTER_SIDE, psi0)?;
        self.conv_bias += step.conv_bias;
        let fc: Vec<f64> = self
            .fc_weights
            .data()
            .iter()
            .zip(&step.fc_weights)
            .map(|(a, b)| a + b)
            .collect();
        self.fc_weights = Image::new(CLASSES, FEATURE_LEN, fc)?;
        for (a, b) in self.fc_bias.iter_mut().zip(&step.fc_bias) {
            *a += b;
        }
        if !self.conv_bias.is_finite() || self.fc_bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(())
    }

    /// `TOYMODEL 1` followed by psi0, fc_weights, conv_bias (1×1) and
    /// fc_bias (1×2) as KMAT bodies.
    pub fn encode(&self) -> String {
        let conv_bias = Image::new(1, 1, vec![self.conv_bias]).expect("finite");
        let fc_bias = Image::new(1, CLASSES, self.fc_bias.to_vec()).expect("finite");
        encode_kmat_list(
            "TOYMODEL",
            &["1".to_string()],
            &[
                ("psi0", self.psi0.as_image()),
                ("fc_weights", &self.fc_weights),
                ("conv_bias", &conv_bias),
                ("fc_bias", &fc_bias),
            ],
        )
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let list = parse_kmat_list(bytes, "TOYMODEL")?;
        if list.args != ["1"] {
            return Err(Error::parse(0, format!("unsupported TOYMODEL version {:?}", list.args)));
        }
        if list.items.len() != 4 {
            return Err(Error::parse(
                bytes.len(),
                format!("TOYMODEL needs 4 matrices, found {}", list.items.len()),
            ));
        }
        let shapes = [(FILTER_SIDE, FILTER_SIDE), (CLASSES, FEATURE_LEN), (1, 1), (1, CLASSES)];
        for (i, (item, want)) in list.items.iter().zip(shapes).enumerate() {
            if item.shape() != want {
                return Err(Error::parse(
                    list.offsets[i],
                    format!("matrix {i} is {:?}, expected {want:?}", item.shape()),
                ));
            }
        }
        let model = Self {
            psi0: Kernel::try_from(list.items[0].clone())?,
            fc_weights: list.items[1].clone(),
            conv_bias: list.items[2].data()[0],
            fc_bias: [list.items[3].data()[0], list.items[3].data()[1]],
        };
        Ok(model)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&read_bytes(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.encode().as_bytes())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; CLASSES]) -> [f64; CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| (l - max).exp());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

pub fn forward(model: &ToyModel, image: &Image) -> Result<Forward> {
    if image.shape() != (INPUT_SIDE, INPUT_SIDE) {
        return Err(Error::Dimension(format!(
            "toy network input must be {INPUT_SIDE}x{INPUT_SIDE}, got {:?}",
            image.shape()
        )));
    }
    let conv = convolve_valid(image, &model.psi0)?;
    let pre_activation: Vec<f64> = conv.data().iter().map(|v| v + model.conv_bias).collect();
    let activation: Vec<f64> = pre_activation.iter().map(|&v| v.max(0.0)).collect();
    let mut logits = model.fc_bias;
    for (z, l) in logits.iter_mut().enumerate() {
        *l += model
            .fc_weights
            .row(z)
            .iter()
            .zip(&activation)
            .map(|(w, a)| w * a)
            .sum::<f64>();
    }
    Ok(Forward {
        logits,
        probabilities: softmax(&logits),
        cache: Cache {
            pre_activation,
            activation,
        },
    })
}

/// `log Σ_z exp(F_z - F_z̃) + F_z̃ - F_y` with `z̃` the arg-max logit.
pub fn loss(logits: &[f64; CLASSES], label: usize) -> f64 {
    let top = (0..CLASSES).fold(0, |best, z| if logits[z] > logits[best] { z } else { best });
    let ft = logits[top];
    // the z̃ term contributes exactly 1 to the sum; ln_1p keeps the rest exact
    let rest: f64 = (0..CLASSES).filter(|&z| z != top).map(|z| (logits[z] - ft).exp()).sum();
    rest.ln_1p() + (ft - logits[label])
}

/// `-log softmax(logits)_y`, the textbook form of [`loss`].
pub fn cross_entropy(logits: &[f64; CLASSES], label: usize) -> f64 {
    -softmax(logits)[label].ln()
}

/// Exact gradient of [`loss`] for one sample. The ReLU derivative at 0 is 0.
pub fn backward(model: &ToyModel, image: &Image, fwd: &Forward, label: usize) -> Gradients {
    let mut g = Gradients::zeros();
    let mut dlogit = fwd.probabilities;
    dlogit[label] -= 1.0;
    g.fc_bias = dlogit;
    let act = &fwd.cache.activation;
    for z in 0..CLASSES {
        let row = &mut g.fc_weights[z * FEATURE_LEN..(z + 1) * FEATURE_LEN];
        for (w, a) in row.iter_mut().zip(act) {
            *w = dlogit[z] * a;
        }
    }
    let mut dpre = vec![0.0; FEATURE_LEN];
    for (j, d) in dpre.iter_mut().enumerate() {
        if fwd.cache.pre_activation[j] > 0.0 {
            *d = (0..CLASSES).map(|z| dlogit[z] * model.fc_weights.get(z, j)).sum();
        }
    }
    g.conv_bias = dpre.iter().sum();
    // pre[r][c] = Σ K[i][j]·x[r + s-1-i][c + s-1-j]
    let src = image.data();
    let s = FILTER_SIDE;
    for i in 0..s {
        for j in 0..s {
            let mut acc = 0.0;
            for r in 0..FEATURE_SIDE {
                let drow = &dpre[r * FEATURE_SIDE..(r + 1) * FEATURE_SIDE];
                let base = (r + s - 1 - i) * INPUT_SIDE + (s - 1 - j);
                let xrow = &src[base..base + FEATURE_SIDE];
                acc += drow.iter().zip(xrow).map(|(d, x)| d * x).sum::<f64>();
            }
            g.psi0[i * s + j] = acc;
        }
    }
    g
}
