//! Pyramid construction from an aligned image/depth pair and a fitted
//! partition, dumped to a directory.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use surfconv_core::io;
use surfconv_core::pyramid::build_pyramid;

use crate::config::Config;

#[derive(Args)]
pub struct PyramidArgs {
    /// Input image (.ppm, .pfm, or .png).
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// Aligned depth image (.pfm or .pgm).
    #[arg(long, value_name = "FILE")]
    depth: PathBuf,
    /// Aligned label map (.pgm), carried through for training.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Partition JSON from fit-d4.
    #[arg(long, value_name = "FILE")]
    partition: PathBuf,
}

pub fn run(args: &PyramidArgs, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "dump directory")?;
    let image = super::read_image_any(&args.image)?;
    let depth = super::read_depth_any(&args.depth, cfg)?;
    let labels = args.labels.as_deref().map(super::read_labels).transpose()?;
    let part = super::at_path(io::load_partition(&args.partition), &args.partition)?;
    let pyr = build_pyramid(&image, &depth, labels.as_ref(), &part, cfg.keep_context)?;
    io::save_pyramid(&pyr, &out)?;
    let sizes: Vec<String> = pyr
        .levels()
        .iter()
        .map(|l| format!("{}x{}", l.image.height(), l.image.width()))
        .collect();
    println!(
        "pyramid: {} levels [{}] -> {}",
        pyr.n_levels(),
        sizes.join(", "),
        out.display()
    );
    Ok(())
}
