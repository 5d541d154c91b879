//! Minibatch SGD with momentum and post-hoc analysis of the learned filter.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward, forward, loss, BinaryDataset, Gradients, ToyModel};
use crate::error::{Error, Result};
use crate::grid::{Image, Kernel};
use crate::kernels::GaussianParams;
use crate::parallel;
use crate::symmetry::{fit_gaussian, symmetrize, SymmetryReport};
use crate::transform::{rotate, Interpolation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Weight decay coefficient, applied to `psi0` and `fc_weights` only.
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Rotate every training image by a fresh seeded angle in `[0, 360)`
    /// each epoch.
    pub augment_rotation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            lr: 0.01,
            momentum: 0.9,
            l2: 0.02,
            batch_size: 128,
            seed: 0,
            augment_rotation: false,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is accepted and freezes the parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Argument(what));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad(format!(
                "learning rate must be finite and non-negative, got {}",
                self.lr
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad(format!("l2 must be finite and non-negative, got {}", self.l2));
        }
        Ok(())
    }
}

/// Symmetry and Gaussian-fit summary of a learned filter.
#[derive(Clone, Debug, PartialEq)]
pub struct Psi0Analysis {
    pub symmetry: SymmetryReport,
    pub gaussian: GaussianParams,
    pub gaussian_corr: f64,
}

pub fn analyze_psi0(psi0: &Kernel) -> Result<Psi0Analysis> {
    let symmetry = symmetrize(psi0)?;
    let (gaussian, gaussian_corr) = fit_gaussian(psi0)?;
    Ok(Psi0Analysis {
        symmetry,
        gaussian,
        gaussian_corr,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub final_test_accuracy: f64,
    /// Mean minibatch loss of each epoch, data term only.
    pub loss_curve: Vec<f64>,
    /// `None` when the learned filter is constant.
    pub psi0_symmetry: Option<SymmetryReport>,
    /// `None` when the Gaussian fit fails.
    pub gaussian_fit: Option<(GaussianParams, f64)>,
}

impl TrainReport {
    /// `epoch,loss`, epochs counted from 1.
    pub fn loss_curve_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.loss_curve.iter().enumerate() {
            let _ = writeln!(out, "{},{l:.16e}", e + 1);
        }
        out
    }
}

/// Trains in place and evaluates on `test_set`.
pub fn train(
    model: &mut ToyModel,
    train_set: &BinaryDataset,
    test_set: &BinaryDataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with_progress(model, train_set, test_set, cfg, |_, _| {})
}

/// [`train`], calling `on_epoch(epoch, mean_loss)` after each epoch.
pub fn train_with_progress(
    model: &mut ToyModel,
    train_set: &BinaryDataset,
    test_set: &BinaryDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainReport> {
    cfg.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut velocity = Gradients::zeros();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let angles: Vec<f64> = if cfg.augment_rotation {
            (0..order.len()).map(|_| rng.gen_range(0.0..360.0)).collect()
        } else {
            Vec::new()
        };
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let start = batch * cfg.batch_size;
            let samples: Vec<(usize, Option<f64>)> = chunk
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, angles.get(start + k).copied()))
                .collect();
            let (grad, batch_loss) = batch_gradient(model, train_set, &samples)?;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch,
                    loss: batch_loss,
                });
            }
            momentum_step(model, &mut velocity, &grad, cfg)?;
            epoch_loss += batch_loss;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        loss_curve.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainReport {
        final_test_accuracy: evaluate(model, test_set)?,
        loss_curve,
        psi0_symmetry: symmetrize(&model.psi0).ok(),
        gaussian_fit: fit_gaussian(&model.psi0).ok(),
    })
}

/// Mean gradient and mean loss over `samples` (index, optional rotation).
/// Per-sample work may run in parallel; the sum is always taken in order.
pub(crate) fn batch_gradient(
    model: &ToyModel,
    set: &BinaryDataset,
    samples: &[(usize, Option<f64>)],
) -> Result<(Gradients, f64)> {
    let per_sample = parallel::map(samples, |&(i, angle)| -> Result<(Gradients, f64)> {
        let rotated;
        let image: &Image = match angle {
            Some(a) => {
                rotated = rotate(&set.images[i], a, Interpolation::Bilinear, 0.0);
                &rotated
            }
            None => &set.images[i],
        };
        let label = usize::from(set.labels[i]);
        let fwd = forward(model, image)?;
        let l = loss(&fwd.logits, label);
        Ok((backward(model, image, &fwd, label), l))
    });
    let mut total = Gradients::zeros();
    let mut total_loss = 0.0;
    for r in per_sample {
        let (g, l) = r?;
        total.accumulate(&g);
        total_loss += l;
    }
    let n = samples.len() as f64;
    total.scale(1.0 / n);
    Ok((total, total_loss / n))
}

/// `v ← μv − lr·(g + λθ)` (decay on weights only), then `θ ← θ + v`.
fn momentum_step(model: &mut ToyModel, v: &mut Gradients, g: &Gradients, cfg: &TrainConfig) -> Result<()> {
    let (mu, lr, l2) = (cfg.momentum, cfg.lr, cfg.l2);
    for ((vi, gi), wi) in v.psi0.iter_mut().zip(&g.psi0).zip(model.psi0.data()) {
        *vi = mu * *vi - lr * (gi + l2 * wi);
    }
    for ((vi, gi), wi) in v.fc_weights.iter_mut().zip(&g.fc_weights).zip(model.fc_weights.data()) {
        *vi = mu * *vi - lr * (gi + l2 * wi);
    }
    v.conv_bias = mu * v.conv_bias - lr * g.conv_bias;
    for (vi, gi) in v.fc_bias.iter_mut().zip(&g.fc_bias) {
        *vi = mu * *vi - lr * gi;
    }
    model.apply(v)
}

/// Fraction of samples whose arg-max logit equals the label; ties count as
/// class 0.
pub fn evaluate(model: &ToyModel, set: &BinaryDataset) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty dataset".into()));
    }
    model.validate()?;
    let correct = parallel::map(&set.images, |img| {
        forward(model, img).map(|f| u8::from(f.logits[1] > f.logits[0]))
    })
    .into_iter()
    .zip(&set.labels)
    .map(|(p, &l)| p.map(|p| usize::from(p == l)))
    .sum::<Result<usize>>()?;
    Ok(correct as f64 / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{CLOTH, DIGIT, INPUT_SIDE};

    /// Jittered vertical bars (digits) versus horizontal bars (clothing).
    fn tiny_set(n: usize, seed: u64) -> BinaryDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = (INPUT_SIDE as f64 - 1.0) / 2.0;
        let (images, labels) = (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { DIGIT } else { CLOTH };
                let (dr, dc) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let img = Image::from_fn(INPUT_SIDE, INPUT_SIDE, |r, col| {
                    let (y, x) = (r as f64 - c - dr, col as f64 - c - dc);
                    let (across, along) = if label == DIGIT { (x, y) } else { (y, x) };
                    if across.abs() < 1.5 && along.abs() < 8.0 {
                        rng.gen_range(0.7..1.0)
                    } else {
                        0.0
                    }
                });
                (img, label)
            })
            .unzip();
        BinaryDataset::new(images, labels).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 8,
            lr: 0.05,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let (tr, te) = (tiny_set(64, 1), tiny_set(32, 2));
        let mut model = ToyModel::init(3);
        let report = train(&mut model, &tr, &te, &small_cfg()).unwrap();
        assert_eq!(report.loss_curve.len(), 3);
        assert!(report.loss_curve[2] < report.loss_curve[0], "{:?}", report.loss_curve);
        assert!(report.final_test_accuracy > 0.9, "{report:?}");
        assert_eq!(report.loss_curve_csv().lines().count(), 4);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let tr = tiny_set(20, 1);
        let mut model = ToyModel::init(9);
        let before = model.clone();
        let cfg = TrainConfig { lr: 0.0, ..small_cfg() };
        train(&mut model, &tr, &tr, &cfg).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn divergence_is_reported() {
        let tr = tiny_set(16, 1);
        let mut model = ToyModel::init(1);
        model.fc_bias = [f64::MAX, -f64::MAX];
        let cfg = TrainConfig {
            lr: 1e300,
            momentum: 0.0,
            ..small_cfg()
        };
        match train(&mut model, &tr, &tr, &cfg) {
            Err(Error::TrainingDiverged { epoch: 0, .. }) | Err(Error::NonFinite { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                momentum: 1.0,
                ..Default::default()
            },
            TrainConfig {
                lr: -0.1,
                ..Default::default()
            },
            TrainConfig {
                l2: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn evaluation_contracts() {
        let set = tiny_set(10, 4);
        assert!(evaluate(&ToyModel::zeros(), &BinaryDataset::new(vec![], vec![]).unwrap()).is_err());
        // uniform predictions tie and fall to class 0: exactly half of this set
        assert_eq!(evaluate(&ToyModel::zeros(), &set).unwrap(), 0.5);
        let mut m = ToyModel::init(2);
        let base = evaluate(&m, &set).unwrap();
        m.fc_bias = m.fc_bias.map(|b| b + 3.25);
        assert_eq!(evaluate(&m, &set).unwrap(), base);
        let one = BinaryDataset::new(vec![set.images[1].clone()], vec![CLOTH]).unwrap();
        let mut biased = ToyModel::zeros();
        biased.fc_bias = [0.0, 1.0];
        assert_eq!(evaluate(&biased, &one).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_sample_doubles_its_contribution() {
        let set = tiny_set(4, 8);
        let model = ToyModel::init(4);
        let (single, _) = batch_gradient(&model, &set, &[(0, None)]).unwrap();
        let (pair, _) = batch_gradient(&model, &set, &[(0, None), (0, None), (1, None), (2, None)]).unwrap();
        let (rest, _) = batch_gradient(&model, &set, &[(1, None), (2, None)]).unwrap();
        // 4·pair = 2·single + 2·rest
        for ((p, s), r) in pair.fc_weights.iter().zip(&single.fc_weights).zip(&rest.fc_weights) {
            assert!((4.0 * p - 2.0 * s - 2.0 * r).abs() < 1e-12);
        }
        for ((p, s), r) in pair.psi0.iter().zip(&single.psi0).zip(&rest.psi0) {
            assert!((4.0 * p - 2.0 * s - 2.0 * r).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let tr = tiny_set(24, 1);
        let cfg = TrainConfig {
            augment_rotation: true,
            ..small_cfg()
        };
        let run = || {
            let mut m = ToyModel::init(6);
            let r = train(&mut m, &tr, &tr, &cfg).unwrap();
            (m, r.loss_curve)
        };
        assert_eq!(run(), run());
    }
}
