//! HHA encoding of a depth image under the config camera and gravity.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use surfconv_core::encode::{hha, HhaParams};
use surfconv_core::io;

use crate::config::Config;

#[derive(Args)]
pub struct HhaArgs {
    /// Depth image (.pfm or .pgm).
    #[arg(long, value_name = "FILE")]
    depth: PathBuf,
}

pub fn run(args: &HhaArgs, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "output directory")?;
    let depth = super::read_depth_any(&args.depth, cfg)?;
    let cam = cfg.camera()?;
    let params = HhaParams {
        gravity: cfg.gravity,
        ground_height: cfg.ground_height,
        height_range: cfg.height_range,
    };
    let encoded = hha(&depth, &cam, &params)?;
    std::fs::create_dir_all(&out)?;
    super::at_path(io::write_pfm(&encoded.image, &out.join("hha.pfm")), &out)?;
    super::at_path(
        io::write_mask_pgm(&encoded.valid, &out.join("hha_valid.pgm")),
        &out,
    )?;
    println!(
        "hha: {}/{} pixels valid -> {}",
        encoded.valid.count(),
        depth.height() * depth.width(),
        out.display()
    );
    Ok(())
}
