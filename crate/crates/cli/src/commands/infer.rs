//! Inference: per-level argmax predictions reassembled to a
//! full-resolution label map per dump.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use surfconv_core::convnet::{load_checkpoint, predict_labels};
use surfconv_core::io;
use surfconv_core::pyramid::reassemble;

use crate::config::Config;

#[derive(Args)]
pub struct InferArgs {
    /// Trained checkpoint from `surfconv train`.
    #[arg(long, value_name = "FILE")]
    net: PathBuf,
    /// Pyramid dumps, or directories containing them.
    #[arg(required = true, value_name = "DUMP")]
    dumps: Vec<PathBuf>,
}

pub fn run(args: &InferArgs, _cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "output directory")?;
    let net = super::at_path(load_checkpoint(&args.net), &args.net)?;
    let dirs = super::expand_dumps(&args.dumps)?;
    std::fs::create_dir_all(&out)?;
    for dir in &dirs {
        let pyr =
            io::load_pyramid(dir).with_context(|| format!("loading pyramid {}", dir.display()))?;
        let mut preds = Vec::with_capacity(pyr.n_levels());
        for level in pyr.levels() {
            let input = super::tensor_from_image(&level.image)?;
            preds.push(predict_labels(&net, &input)?);
        }
        let full = reassemble(&pyr, &preds)?;
        let name = dir
            .file_name()
            .context("dump path has no final component")?
            .to_string_lossy();
        io::write_labels_pgm(&full, &out.join(format!("{name}.pgm")))?;
    }
    println!("infer: {} label map(s) -> {}", dirs.len(), out.display());
    Ok(())
}
