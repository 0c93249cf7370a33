//! Segmentation metrics and the voxel-occupancy sparsity benchmark.
//!
//! One confusion matrix serves both metric families: accumulated with
//! uniform weights it yields the image-wise IOU and accuracy, accumulated
//! with a surface weight map the surface-wise variants. Classes absent
//! from both ground truth and prediction are excluded from the mean IOU.
//!
//! Occupancy counts voxels through a hash set of indices, so the memory
//! cost follows the point count, not the grid volume; only an explicit
//! dense dump allocates the grid.

use std::collections::HashSet;

use thiserror::Error;

use crate::encode::SurfaceWeightMap;
use crate::geom::{Cuboid, PointCloud};
use crate::raster::{LabelMap, IGNORE_LABEL};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("confusion matrix has no counted pixels")]
    EmptyMatrix,
    #[error("no points, or none inside the bounds")]
    EmptyCloud,
    #[error("voxel resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("bounds are empty along at least one axis")]
    EmptyBounds,
    #[error("dense grid of {requested} voxels exceeds the cap of {cap}")]
    GridTooLarge { requested: usize, cap: usize },
}

/// K x K weighted accumulator, row = ground truth, column = prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    classes: usize,
    cells: Vec<f64>,
}

/// Metrics derived from one confusion matrix. `per_class` holds `None`
/// for classes absent from both ground truth and prediction; those are
/// excluded from `mean_iou`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mean_iou: f64,
    pub pixel_acc: f64,
    pub per_class: Vec<Option<f64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self, EvalError> {
        if classes == 0 {
            return Err(EvalError::ShapeMismatch("zero classes".into()));
        }
        Ok(Self {
            classes,
            cells: vec![0.0; classes * classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> f64 {
        self.cells[gt * self.classes + pred]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Adds every non-ignored pixel as `cm[gt][pred] += weight`, with a
    /// weight of 1 when no map is given. A pixel ignored in either map is
    /// skipped.
    pub fn accumulate(
        &mut self,
        pred: &LabelMap,
        gt: &LabelMap,
        weights: Option<&SurfaceWeightMap>,
    ) -> Result<(), EvalError> {
        if pred.height() != gt.height() || pred.width() != gt.width() {
            return Err(EvalError::ShapeMismatch(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        if let Some(w) = weights {
            if w.height() != gt.height() || w.width() != gt.width() {
                return Err(EvalError::ShapeMismatch(format!(
                    "weights {}x{} vs maps {}x{}",
                    w.height(),
                    w.width(),
                    gt.height(),
                    gt.width()
                )));
            }
        }
        for r in 0..gt.height() {
            for c in 0..gt.width() {
                let g = gt.get(r, c);
                let p = pred.get(r, c);
                if g == IGNORE_LABEL || p == IGNORE_LABEL {
                    continue;
                }
                for label in [g, p] {
                    if label as usize >= self.classes {
                        return Err(EvalError::LabelOutOfRange {
                            label,
                            classes: self.classes,
                        });
                    }
                }
                let w = weights.map_or(1.0, |m| m.get(r, c));
                self.cells[g as usize * self.classes + p as usize] += w;
            }
        }
        Ok(())
    }

    /// Adds another matrix cell by cell; per-image matrices built in
    /// parallel reduce through this.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), EvalError> {
        if other.classes != self.classes {
            return Err(EvalError::ShapeMismatch(format!(
                "merging {} classes into {}",
                other.classes, self.classes
            )));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        Ok(())
    }

    pub fn metrics(&self) -> Result<Metrics, EvalError> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(EvalError::EmptyMatrix);
        }
        let k_count = self.classes;
        let mut per_class = Vec::with_capacity(k_count);
        let mut diag = 0.0;
        for k in 0..k_count {
            let tp = self.get(k, k);
            diag += tp;
            let gt_mass: f64 = (0..k_count).map(|j| self.get(k, j)).sum();
            let pred_mass: f64 = (0..k_count).map(|i| self.get(i, k)).sum();
            if gt_mass == 0.0 && pred_mass == 0.0 {
                per_class.push(None);
            } else {
                // union = gt + pred - tp >= max(gt, pred) > 0 here.
                per_class.push(Some(tp / (gt_mass + pred_mass - tp)));
            }
        }
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(EvalError::EmptyMatrix);
        }
        Ok(Metrics {
            mean_iou: present.iter().sum::<f64>() / present.len() as f64,
            pixel_acc: diag / total,
            per_class,
        })
    }
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "mean_iou,pixel_acc";

    pub fn csv_row(&self) -> String {
        format!("{},{}", self.mean_iou, self.pixel_acc)
    }
}

impl std::fmt::Display for Metrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "mean IOU   {:.4}", self.mean_iou)?;
        writeln!(f, "pixel acc  {:.4}", self.pixel_acc)?;
        for (k, iou) in self.per_class.iter().enumerate() {
            match iou {
                Some(v) => writeln!(f, "class {k:3}  {v:.4}")?,
                None => writeln!(f, "class {k:3}  absent")?,
            }
        }
        Ok(())
    }
}

/// Occupancy of a voxelization of `bounds`: how many voxels contain at
/// least one point.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyReport {
    pub resolution: f64,
    pub dims: [usize; 3],
    pub occupied: usize,
    pub total: usize,
    pub fraction: f64,
}

impl OccupancyReport {
    pub const CSV_HEADER: &'static str = "scene,resolution,occupied,total,fraction";

    pub fn csv_row(&self, scene: &str) -> String {
        format!(
            "{scene},{},{},{},{}",
            self.resolution, self.occupied, self.total, self.fraction
        )
    }
}

fn grid_dims(resolution: f64, bounds: &Cuboid) -> Result<[usize; 3], EvalError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(EvalError::InvalidResolution(resolution));
    }
    let extent = [
        bounds.max.x - bounds.min.x,
        bounds.max.y - bounds.min.y,
        bounds.max.z - bounds.min.z,
    ];
    if extent.iter().any(|e| !(*e > 0.0)) {
        return Err(EvalError::EmptyBounds);
    }
    Ok([
        (extent[0] / resolution).ceil() as usize,
        (extent[1] / resolution).ceil() as usize,
        (extent[2] / resolution).ceil() as usize,
    ])
}

/// Voxel index of a point, or `None` outside the bounds. Points exactly
/// on the upper boundary fold into the last voxel, so a wall flush with
/// the bounds is still counted.
fn voxel_of(
    p: &crate::geom::Point3,
    bounds: &Cuboid,
    resolution: f64,
    dims: &[usize; 3],
) -> Option<[usize; 3]> {
    let coords = [
        (p.x, bounds.min.x, bounds.max.x, dims[0]),
        (p.y, bounds.min.y, bounds.max.y, dims[1]),
        (p.z, bounds.min.z, bounds.max.z, dims[2]),
    ];
    let mut idx = [0usize; 3];
    for (slot, (v, lo, hi, dim)) in idx.iter_mut().zip(coords) {
        if v < lo || v > hi {
            return None;
        }
        *slot = (((v - lo) / resolution).floor() as usize).min(dim - 1);
    }
    Some(idx)
}

/// Counts occupied voxels through a sparse set; memory is O(points).
pub fn occupancy(
    cloud: &PointCloud,
    resolution: f64,
    bounds: &Cuboid,
) -> Result<OccupancyReport, EvalError> {
    let dims = grid_dims(resolution, bounds)?;
    let mut seen: HashSet<[usize; 3]> = HashSet::new();
    for p in &cloud.points {
        if let Some(idx) = voxel_of(p, bounds, resolution, &dims) {
            seen.insert(idx);
        }
    }
    if seen.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| EvalError::GridTooLarge {
            requested: dims.iter().fold(1usize, |a, &d| a.saturating_mul(d)),
            cap: usize::MAX,
        })?;
    Ok(OccupancyReport {
        resolution,
        dims,
        occupied: seen.len(),
        total,
        fraction: seen.len() as f64 / total as f64,
    })
}

/// Dense occupancy grid in x-major, then y, then z order. Refused above
/// `max_voxels`; the sparse [`occupancy`] count has no such limit.
pub fn occupancy_grid(
    cloud: &PointCloud,
    resolution: f64,
    bounds: &Cuboid,
    max_voxels: usize,
) -> Result<(Vec<bool>, [usize; 3]), EvalError> {
    let dims = grid_dims(resolution, bounds)?;
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&t| t <= max_voxels)
        .ok_or_else(|| EvalError::GridTooLarge {
            requested: dims.iter().fold(1usize, |a, &d| a.saturating_mul(d)),
            cap: max_voxels,
        })?;
    let mut grid = vec![false; total];
    for p in &cloud.points {
        if let Some([ix, iy, iz]) = voxel_of(p, bounds, resolution, &dims) {
            grid[(ix * dims[1] + iy) * dims[2] + iz] = true;
        }
    }
    if !grid.iter().any(|&g| g) {
        return Err(EvalError::EmptyCloud);
    }
    Ok((grid, dims))
}
