//! Depth-aware multi-scale pyramid: one proportionally rescaled, masked
//! image per depth level, plus the inverse mapping back to full resolution.
//!
//! The farthest level keeps native resolution; nearer levels are
//! downsampled by `s_n = z_n / z_N` so that a fixed-size filter covers the
//! same physical extent at every level's representative depth.

use rayon::prelude::*;
use thiserror::Error;

use crate::d4::{assign_level, D4Error, LevelPartition};
use crate::geom::DepthImage;
use crate::raster::{LabelMap, Mask, PlanarImage, IGNORE_LABEL};

#[derive(Debug, Error)]
pub enum PyramidError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Partition(#[from] D4Error),
    #[error("invalid pyramid: {0}")]
    InvalidPyramid(String),
}

/// One depth level: a rescaled image, the cells it owns, and optional
/// downsampled labels (ignore sentinel outside the mask).
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub level_index: usize,
    pub scale: f64,
    pub image: PlanarImage,
    pub valid: Mask,
    pub labels: Option<LabelMap>,
}

/// The full pyramid plus the full-resolution ownership map that ties each
/// source pixel to the single level claiming it (0 = invalid depth).
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<PyramidLevel>,
    partition: LevelPartition,
    height: usize,
    width: usize,
    level_map: Vec<u16>,
}

impl Pyramid {
    pub fn levels(&self) -> &[PyramidLevel] {
        &self.levels
    }

    pub fn partition(&self) -> &LevelPartition {
        &self.partition
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major per-pixel owning level, 1-based; 0 marks invalid depth.
    pub fn level_map(&self) -> &[u16] {
        &self.level_map
    }

    /// Rebuilds a pyramid from stored parts, revalidating every invariant
    /// that `build_pyramid` guarantees by construction.
    pub fn from_parts(
        levels: Vec<PyramidLevel>,
        partition: LevelPartition,
        height: usize,
        width: usize,
        level_map: Vec<u16>,
    ) -> Result<Self, PyramidError> {
        if levels.len() != partition.n_levels() {
            return Err(PyramidError::InvalidPyramid(format!(
                "{} levels for a {}-level partition",
                levels.len(),
                partition.n_levels()
            )));
        }
        if level_map.len() != height * width {
            return Err(PyramidError::InvalidPyramid(format!(
                "level map has {} entries for {}x{} source",
                level_map.len(),
                height,
                width
            )));
        }
        let scales = level_scales(&partition);
        for (idx, level) in levels.iter().enumerate() {
            if level.level_index != idx + 1 {
                return Err(PyramidError::InvalidPyramid(format!(
                    "level {} stored at position {}",
                    level.level_index, idx
                )));
            }
            if level.scale != scales[idx] {
                return Err(PyramidError::InvalidPyramid(format!(
                    "level {} scale {} does not match partition scale {}",
                    idx + 1,
                    level.scale,
                    scales[idx]
                )));
            }
            let (h_n, w_n) = level_dims(height, width, level.scale);
            if level.image.height() != h_n || level.image.width() != w_n {
                return Err(PyramidError::InvalidPyramid(format!(
                    "level {} image is {}x{}, expected {}x{}",
                    idx + 1,
                    level.image.height(),
                    level.image.width(),
                    h_n,
                    w_n
                )));
            }
            if level.valid.height() != h_n || level.valid.width() != w_n {
                return Err(PyramidError::InvalidPyramid(format!(
                    "level {} mask is {}x{}, expected {}x{}",
                    idx + 1,
                    level.valid.height(),
                    level.valid.width(),
                    h_n,
                    w_n
                )));
            }
            if let Some(labels) = &level.labels {
                if labels.height() != h_n || labels.width() != w_n {
                    return Err(PyramidError::InvalidPyramid(format!(
                        "level {} labels are {}x{}, expected {}x{}",
                        idx + 1,
                        labels.height(),
                        labels.width(),
                        h_n,
                        w_n
                    )));
                }
            }
        }
        let n = levels.len() as u16;
        if level_map.iter().any(|&v| v > n) {
            return Err(PyramidError::InvalidPyramid(format!(
                "level map references a level beyond {n}"
            )));
        }
        Ok(Self {
            levels,
            partition,
            height,
            width,
            level_map,
        })
    }
}

/// Per-level resolution scales `s_n = z_n / z_N`; the farthest level is
/// exactly 1.
pub fn level_scales(part: &LevelPartition) -> Vec<f64> {
    let reps = part.rep_depths();
    let z_far = reps[reps.len() - 1];
    reps.iter().map(|&z| z / z_far).collect()
}

fn level_dims(height: usize, width: usize, scale: f64) -> (usize, usize) {
    let h = ((height as f64 * scale).round() as usize).max(1);
    let w = ((width as f64 * scale).round() as usize).max(1);
    (h, w)
}

/// Builds the pyramid for one RGBD frame.
///
/// Each level is an area-average downsample of the full image; a cell is
/// valid iff at least half of its covered source area belongs to the level
/// (ties valid). With `keep_context` false, values outside the mask are
/// zeroed; with it true, the plain downsample is kept everywhere and only
/// the mask distinguishes in-level cells. Labels are an area-weighted
/// majority vote among the level's own pixels, smallest class id on ties,
/// ignore sentinel where the cell is invalid or unlabeled.
pub fn build_pyramid(
    image: &PlanarImage,
    depth: &DepthImage,
    labels: Option<&LabelMap>,
    part: &LevelPartition,
    keep_context: bool,
) -> Result<Pyramid, PyramidError> {
    let (height, width) = (depth.height(), depth.width());
    if image.height() != height || image.width() != width {
        return Err(PyramidError::DimensionMismatch(format!(
            "image {}x{} vs depth {}x{}",
            image.height(),
            image.width(),
            height,
            width
        )));
    }
    if let Some(l) = labels {
        if l.height() != height || l.width() != width {
            return Err(PyramidError::DimensionMismatch(format!(
                "labels {}x{} vs depth {}x{}",
                l.height(),
                l.width(),
                height,
                width
            )));
        }
    }

    let mut level_map = vec![0u16; height * width];
    for row in 0..height {
        for col in 0..width {
            let z = depth.get(row, col);
            if z > 0.0 {
                level_map[row * width + col] = assign_level(part, z)? as u16;
            }
        }
    }

    let scales = level_scales(part);
    let levels: Vec<PyramidLevel> = scales
        .par_iter()
        .enumerate()
        .map(|(idx, &scale)| {
            build_level(
                idx + 1,
                scale,
                image,
                labels,
                &level_map,
                height,
                width,
                keep_context,
            )
        })
        .collect();

    Ok(Pyramid {
        levels,
        partition: part.clone(),
        height,
        width,
        level_map,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_level(
    level_index: usize,
    scale: f64,
    image: &PlanarImage,
    labels: Option<&LabelMap>,
    level_map: &[u16],
    height: usize,
    width: usize,
    keep_context: bool,
) -> PyramidLevel {
    let (h_n, w_n) = level_dims(height, width, scale);
    let channels = image.channels();
    let mut out = PlanarImage::zeros(channels, h_n, w_n);
    let mut valid = Mask::filled(h_n, w_n, false);
    let mut out_labels = labels.map(|_| LabelMap::ignored(h_n, w_n));

    let row_ratio = height as f64 / h_n as f64;
    let col_ratio = width as f64 / w_n as f64;
    let own = level_index as u16;
    let mut acc = vec![0.0f64; channels];
    let mut votes: Vec<(u8, f64)> = Vec::new();

    for tr in 0..h_n {
        let r0 = tr as f64 * row_ratio;
        let r1 = (tr as f64 + 1.0) * row_ratio;
        for tc in 0..w_n {
            let c0 = tc as f64 * col_ratio;
            let c1 = (tc as f64 + 1.0) * col_ratio;
            let box_area = (r1 - r0) * (c1 - c0);

            acc.fill(0.0);
            votes.clear();
            let mut member_area = 0.0f64;

            let sr_end = (r1.ceil() as usize).min(height);
            let sc_end = (c1.ceil() as usize).min(width);
            for sr in (r0.floor() as usize)..sr_end {
                let row_ov = (sr as f64 + 1.0).min(r1) - (sr as f64).max(r0);
                if row_ov <= 0.0 {
                    continue;
                }
                for sc in (c0.floor() as usize)..sc_end {
                    let col_ov = (sc as f64 + 1.0).min(c1) - (sc as f64).max(c0);
                    if col_ov <= 0.0 {
                        continue;
                    }
                    let area = row_ov * col_ov;
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += area * image.get(ch, sr, sc) as f64;
                    }
                    if level_map[sr * width + sc] == own {
                        member_area += area;
                        if let Some(l) = labels {
                            let class = l.get(sr, sc);
                            if class != IGNORE_LABEL {
                                match votes.iter_mut().find(|(c, _)| *c == class) {
                                    Some((_, w)) => *w += area,
                                    None => votes.push((class, area)),
                                }
                            }
                        }
                    }
                }
            }

            let is_valid = member_area >= 0.5 * box_area;
            valid.set(tr, tc, is_valid);
            if keep_context || is_valid {
                for (ch, a) in acc.iter().enumerate() {
                    out.set(ch, tr, tc, (*a / box_area) as f32);
                }
            }
            if is_valid {
                if let Some(ol) = &mut out_labels {
                    let mut best: Option<(u8, f64)> = None;
                    for &(class, w) in &votes {
                        best = match best {
                            None => Some((class, w)),
                            Some((bc, bw)) if w > bw || (w == bw && class < bc) => Some((class, w)),
                            keep => keep,
                        };
                    }
                    if let Some((class, _)) = best {
                        ol.set(tr, tc, class);
                    }
                }
            }
        }
    }

    PyramidLevel {
        level_index,
        scale,
        image: out,
        valid,
        labels: out_labels,
    }
}

/// Maps per-level predictions back onto the full-resolution grid: every
/// owned pixel reads its level's prediction at the nearest rescaled cell,
/// unowned pixels get the ignore sentinel.
pub fn reassemble(pyr: &Pyramid, predictions: &[LabelMap]) -> Result<LabelMap, PyramidError> {
    if predictions.len() != pyr.n_levels() {
        return Err(PyramidError::DimensionMismatch(format!(
            "{} predictions for {} levels",
            predictions.len(),
            pyr.n_levels()
        )));
    }
    for (level, pred) in pyr.levels().iter().zip(predictions) {
        if pred.height() != level.image.height() || pred.width() != level.image.width() {
            return Err(PyramidError::DimensionMismatch(format!(
                "level {} prediction is {}x{}, expected {}x{}",
                level.level_index,
                pred.height(),
                pred.width(),
                level.image.height(),
                level.image.width()
            )));
        }
    }

    let mut out = LabelMap::ignored(pyr.height(), pyr.width());
    for row in 0..pyr.height() {
        for col in 0..pyr.width() {
            let owner = pyr.level_map[row * pyr.width + col];
            if owner == 0 {
                continue;
            }
            let level = &pyr.levels[owner as usize - 1];
            let pred = &predictions[owner as usize - 1];
            let tr = ((row as f64 * level.scale).round() as usize).min(pred.height() - 1);
            let tc = ((col as f64 * level.scale).round() as usize).min(pred.width() - 1);
            out.set(row, col, pred.get(tr, tc));
        }
    }
    Ok(out)
}
