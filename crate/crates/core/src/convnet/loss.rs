//! Masked cross-entropy over one or more pyramid levels, with the
//! image-area reweighting variant.
//!
//! All items passed in one call share a single normalization: the loss is
//! `sum(w_p * CE_p) / sum(w_p)` over every valid pixel of every item. In
//! reweighted mode a level-n pixel's weight carries an extra `(1/s_n)²`
//! because it stands for that many full-resolution pixels.

use super::{ConvError, Tensor};
use crate::encode::SurfaceWeightMap;
use crate::raster::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Uniform,
    ImageAreaReweighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub mode: LossMode,
    pub ignore_label: u8,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            mode: LossMode::Uniform,
            ignore_label: crate::raster::IGNORE_LABEL,
        }
    }
}

/// One level's logits and targets. `scale` is the level's resolution scale
/// `s_n`; `pixel_weights` optionally weights pixels further (surface area).
pub struct LossItem<'a> {
    pub logits: &'a Tensor,
    pub labels: &'a LabelMap,
    pub scale: f64,
    pub pixel_weights: Option<&'a SurfaceWeightMap>,
}

/// Loss value, per-item logit gradients, and the weight mass that
/// normalized them (useful for re-normalizing across a bigger unit).
pub struct LossOutput {
    pub loss: f64,
    pub grads: Vec<Tensor>,
    pub total_weight: f64,
}

/// Weighted masked cross-entropy over the given items, with gradients.
pub fn masked_ce_loss(items: &[LossItem], cfg: &LossConfig) -> Result<LossOutput, ConvError> {
    // First pass: validate shapes and accumulate the normalizing mass.
    let mut total_weight = 0.0f64;
    for item in items {
        let s = item.logits.shape();
        if s.len() != 3 {
            return Err(ConvError::ShapeMismatch(format!(
                "logits must be K x H x W, got {s:?}"
            )));
        }
        let (classes, h, w) = (s[0], s[1], s[2]);
        if item.labels.height() != h || item.labels.width() != w {
            return Err(ConvError::ShapeMismatch(format!(
                "labels {}x{} vs logits {h}x{w}",
                item.labels.height(),
                item.labels.width()
            )));
        }
        if let Some(m) = item.pixel_weights {
            if m.height() != h || m.width() != w {
                return Err(ConvError::ShapeMismatch(format!(
                    "pixel weights {}x{} vs logits {h}x{w}",
                    m.height(),
                    m.width()
                )));
            }
        }
        if !(item.scale > 0.0 && item.scale <= 1.0 + 1e-12) {
            return Err(ConvError::InvalidScale(item.scale));
        }
        let mode_factor = match cfg.mode {
            LossMode::Uniform => 1.0,
            LossMode::ImageAreaReweighted => 1.0 / (item.scale * item.scale),
        };
        for r in 0..h {
            for c in 0..w {
                let label = item.labels.get(r, c);
                if label == cfg.ignore_label {
                    continue;
                }
                if label as usize >= classes {
                    return Err(ConvError::LabelOutOfRange { label, classes });
                }
                let w_p = mode_factor * item.pixel_weights.map_or(1.0, |m| m.get(r, c));
                total_weight += w_p;
            }
        }
    }
    if total_weight <= 0.0 {
        return Err(ConvError::AllPixelsIgnored);
    }

    let mut loss = 0.0f64;
    let mut grads = Vec::with_capacity(items.len());
    for item in items {
        let s = item.logits.shape();
        let (classes, h, w) = (s[0], s[1], s[2]);
        let mode_factor = match cfg.mode {
            LossMode::Uniform => 1.0,
            LossMode::ImageAreaReweighted => 1.0 / (item.scale * item.scale),
        };
        let mut grad = Tensor::zeros(s);
        let ld = item.logits.data();
        let gd = grad.data_mut();
        let plane = h * w;
        for r in 0..h {
            for c in 0..w {
                let label = item.labels.get(r, c);
                if label == cfg.ignore_label {
                    continue;
                }
                let w_p = mode_factor * item.pixel_weights.map_or(1.0, |m| m.get(r, c));
                if w_p == 0.0 {
                    continue;
                }
                let pix = r * w + c;
                let mut max = f64::NEG_INFINITY;
                for k in 0..classes {
                    max = max.max(ld[k * plane + pix]);
                }
                let mut sum_exp = 0.0;
                for k in 0..classes {
                    sum_exp += (ld[k * plane + pix] - max).exp();
                }
                let lse = max + sum_exp.ln();
                loss += w_p * (lse - ld[label as usize * plane + pix]);
                for k in 0..classes {
                    let softmax = (ld[k * plane + pix] - lse).exp();
                    let target = (k == label as usize) as u8 as f64;
                    gd[k * plane + pix] = w_p * (softmax - target) / total_weight;
                }
            }
        }
        grads.push(grad);
    }
    loss /= total_weight;
    if !loss.is_finite() {
        return Err(ConvError::NonFinite("loss".into()));
    }
    Ok(LossOutput {
        loss,
        grads,
        total_weight,
    })
}
