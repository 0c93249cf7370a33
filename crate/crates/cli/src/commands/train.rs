//! Training over pyramid dumps: one shared-weight SegNet across all
//! levels, checkpoint plus a per-epoch loss trace as outputs.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfconv_core::convnet::{
    save_checkpoint, train_surfconv, LossConfig, SegNet, TrainConfig, TrainImage, TrainItem,
};
use surfconv_core::io;
use surfconv_core::raster::IGNORE_LABEL;

use crate::config::Config;

#[derive(Args)]
pub struct TrainArgs {
    /// Pyramid dumps, or directories containing them.
    #[arg(required = true, value_name = "DUMP")]
    dumps: Vec<PathBuf>,
}

pub fn run(args: &TrainArgs, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "checkpoint path")?;
    let dirs = super::expand_dumps(&args.dumps)?;

    let mut dataset = Vec::with_capacity(dirs.len());
    let mut channels = None;
    let mut max_label = 0u8;
    for dir in &dirs {
        let pyr =
            io::load_pyramid(dir).with_context(|| format!("loading pyramid {}", dir.display()))?;
        let mut items = Vec::with_capacity(pyr.n_levels());
        for level in pyr.levels() {
            let labels = level
                .labels
                .clone()
                .with_context(|| format!("{} has no labels; cannot train", dir.display()))?;
            match channels {
                None => channels = Some(level.image.channels()),
                Some(c) if c != level.image.channels() => {
                    bail!(
                        "channel count differs across dumps ({c} vs {})",
                        level.image.channels()
                    )
                }
                Some(_) => {}
            }
            for &l in labels.data() {
                if l != IGNORE_LABEL {
                    max_label = max_label.max(l);
                }
            }
            items.push(TrainItem {
                input: super::tensor_from_image(&level.image)?,
                labels,
                scale: level.scale,
            });
        }
        dataset.push(TrainImage { items });
    }

    let channels = channels.context("no pyramid levels found")?;
    let classes = max_label as usize + 1;
    if classes < 2 {
        bail!("training needs at least 2 classes, found {classes}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = SegNet::random(channels, &cfg.hidden, classes, cfg.kernel, &mut rng)?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        lr: cfg.lr,
        seed: cfg.seed,
        loss: LossConfig {
            mode: cfg.loss,
            ignore_label: IGNORE_LABEL,
        },
    };
    let trace = train_surfconv(&mut net, &dataset, &train_cfg)?;

    super::at_path(save_checkpoint(&net, &out), &out)?;
    let trace_path = out.with_extension("csv");
    super::at_path(io::write_loss_trace(&trace, &trace_path), &trace_path)?;
    let last = trace.last().context("zero epochs configured")?;
    println!(
        "train: {} images, {} classes, {} params; epoch {} loss {:.6} acc {:.4} -> {} (trace {})",
        dataset.len(),
        classes,
        net.param_count(),
        last.epoch,
        last.loss,
        last.pixel_acc,
        out.display(),
        trace_path.display()
    );
    Ok(())
}
