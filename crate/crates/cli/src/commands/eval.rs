//! Segmentation metrics over (prediction, ground truth) pairs, either
//! unweighted (img) or weighted by per-pixel surface area (surf).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use surfconv_core::encode::surface_weights;
use surfconv_core::eval::{ConfusionMatrix, Metrics};
use surfconv_core::raster::IGNORE_LABEL;

use crate::config::Config;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Every pixel counts the same.
    Img,
    /// Pixels count by the 3D surface area they observe.
    Surf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted label map (.pgm); repeat for multiple pairs.
    #[arg(long, required = true, value_name = "FILE")]
    pred: Vec<PathBuf>,
    /// Ground-truth label map (.pgm), paired with --pred by position.
    #[arg(long, required = true, value_name = "FILE")]
    gt: Vec<PathBuf>,
    /// Depth image per pair, required for surf mode.
    #[arg(long, value_name = "FILE")]
    depth: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalMode::Img)]
    mode: EvalMode,
}

pub fn run(args: &EvalArgs, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    if args.pred.len() != args.gt.len() {
        bail!(
            "{} predictions but {} ground-truth maps",
            args.pred.len(),
            args.gt.len()
        );
    }
    if args.mode == EvalMode::Surf && args.depth.len() != args.pred.len() {
        bail!(
            "surf mode needs one --depth per pair, got {} for {} pairs",
            args.depth.len(),
            args.pred.len()
        );
    }

    let mut pairs = Vec::with_capacity(args.pred.len());
    let mut classes = 0usize;
    for (idx, (pred_path, gt_path)) in args.pred.iter().zip(&args.gt).enumerate() {
        let pred = super::read_labels(pred_path)?;
        let gt = super::read_labels(gt_path)?;
        for map in [&pred, &gt] {
            for &l in map.data() {
                if l != IGNORE_LABEL {
                    classes = classes.max(l as usize + 1);
                }
            }
        }
        let weights = if args.mode == EvalMode::Surf {
            let depth = super::read_depth_any(&args.depth[idx], cfg)?;
            let cam = surfconv_core::geom::CameraModel::new(
                cfg.fx,
                cfg.fy,
                cfg.cx,
                cfg.cy,
                depth.width(),
                depth.height(),
            )
            .context("config camera")?;
            Some(surface_weights(&depth, &cam))
        } else {
            None
        };
        pairs.push((pred, gt, weights));
    }
    if classes == 0 {
        bail!("every pixel is ignored; nothing to evaluate");
    }

    let mut cm = ConfusionMatrix::new(classes)?;
    for (pred, gt, weights) in &pairs {
        cm.accumulate(pred, gt, weights.as_ref())?;
    }
    let metrics = cm.metrics()?;
    print!("{metrics}");
    if let Some(path) = out {
        let csv = format!("{}\n{}\n", Metrics::CSV_HEADER, metrics.csv_row());
        std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
