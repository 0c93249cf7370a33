//! SGD over (image, level) items with shared weights across levels.
//!
//! The training unit is one level of one image; items are visited in a
//! seeded shuffled order, re-shuffled each epoch. Each item's loss is
//! normalized by its own image's total pixel weight, so the sum of an
//! image's item losses equals the joint loss over all its levels and the
//! reweighting semantics stay intact under per-item updates.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{masked_ce_loss, LossConfig, LossItem};
use super::net::SegNet;
use super::tensor::Tensor;
use super::ConvError;
use crate::raster::LabelMap;

/// One level of one training image.
pub struct TrainItem {
    pub input: Tensor,
    pub labels: LabelMap,
    pub scale: f64,
}

/// All levels of one training image.
pub struct TrainImage {
    pub items: Vec<TrainItem>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub loss: LossConfig,
}

/// Per-epoch trace entry; `loss` is the mean joint image loss, `pixel_acc`
/// the unweighted accuracy over all valid pixels seen that epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub pixel_acc: f64,
}

/// The weight mass of an item under the configured loss, independent of
/// the network: used to pre-normalize per-item updates within an image.
fn item_weight(item: &TrainItem, cfg: &LossConfig) -> f64 {
    let mode_factor = match cfg.mode {
        super::loss::LossMode::Uniform => 1.0,
        super::loss::LossMode::ImageAreaReweighted => 1.0 / (item.scale * item.scale),
    };
    let mut total = 0.0;
    for r in 0..item.labels.height() {
        for c in 0..item.labels.width() {
            if item.labels.get(r, c) != cfg.ignore_label {
                total += mode_factor;
            }
        }
    }
    total
}

/// Trains the network in place; deterministic for a fixed seed.
pub fn train_surfconv(
    net: &mut SegNet,
    dataset: &[TrainImage],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStat>, ConvError> {
    // Image weight masses and the item visit list, fixed across epochs.
    let mut image_weights = Vec::with_capacity(dataset.len());
    let mut visits: Vec<(usize, usize)> = Vec::new();
    for (img_idx, image) in dataset.iter().enumerate() {
        let mut w_img = 0.0;
        for (item_idx, item) in image.items.iter().enumerate() {
            let w = item_weight(item, &cfg.loss);
            if w > 0.0 {
                visits.push((img_idx, item_idx));
            }
            w_img += w;
        }
        image_weights.push(w_img);
    }
    if visits.is_empty() {
        return Err(ConvError::EmptyDataset);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let images_with_pixels = image_weights.iter().filter(|&&w| w > 0.0).count() as f64;
    for epoch in 0..cfg.epochs {
        visits.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let mut correct = 0usize;
        let mut counted = 0usize;
        // Inputs were validated finite at construction, so a non-finite
        // value surfacing mid-training is divergence, not bad input.
        let diverged = |e: ConvError| match e {
            ConvError::NonFinite(_) => ConvError::DivergedLoss { epoch },
            other => other,
        };
        for &(img_idx, item_idx) in &visits {
            let item = &dataset[img_idx].items[item_idx];
            let fwd = net.forward(&item.input).map_err(diverged)?;
            let out = masked_ce_loss(
                &[LossItem {
                    logits: fwd.output(),
                    labels: &item.labels,
                    scale: item.scale,
                    pixel_weights: None,
                }],
                &cfg.loss,
            )
            .map_err(diverged)?;
            // Rescale from per-item to per-image normalization.
            let rescale = out.total_weight / image_weights[img_idx];
            epoch_loss += out.loss * rescale;
            let mut dout = out.grads.into_iter().next().expect("one item in, one out");
            for g in dout.data_mut() {
                *g *= rescale;
            }
            let grads = net.backward(&fwd, &dout).map_err(diverged)?;
            net.apply_step(&grads, cfg.lr).map_err(diverged)?;

            tally_accuracy(
                fwd.output(),
                &item.labels,
                cfg.loss.ignore_label,
                &mut correct,
                &mut counted,
            );
        }
        let loss = epoch_loss / images_with_pixels;
        if !loss.is_finite() {
            return Err(ConvError::DivergedLoss { epoch });
        }
        trace.push(EpochStat {
            epoch,
            loss,
            pixel_acc: if counted == 0 {
                0.0
            } else {
                correct as f64 / counted as f64
            },
        });
    }
    Ok(trace)
}

fn tally_accuracy(
    logits: &Tensor,
    labels: &LabelMap,
    ignore: u8,
    correct: &mut usize,
    counted: &mut usize,
) {
    let (classes, h, w) = (logits.shape()[0], logits.shape()[1], logits.shape()[2]);
    let data = logits.data();
    for r in 0..h {
        for c in 0..w {
            let label = labels.get(r, c);
            if label == ignore {
                continue;
            }
            let pix = r * w + c;
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for k in 0..classes {
                let v = data[k * h * w + pix];
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            *counted += 1;
            if best == label as usize {
                *correct += 1;
            }
        }
    }
}
