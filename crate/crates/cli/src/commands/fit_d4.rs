//! D4 fitting: pools the valid depths of every input image and writes the
//! fitted partition as JSON.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use surfconv_core::d4;
use surfconv_core::io;

use crate::config::Config;

#[derive(Args)]
pub struct FitD4Args {
    /// Depth images to pool (.pfm or .pgm).
    #[arg(required = true, value_name = "DEPTH")]
    depths: Vec<PathBuf>,
}

pub fn run(args: &FitD4Args, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "partition JSON path")?;
    let mut pool = Vec::new();
    for path in &args.depths {
        let depth = super::read_depth_any(path, cfg)?;
        pool.extend(depth.valid_depths());
    }
    if pool.is_empty() {
        bail!("no valid depth pixels in the inputs");
    }
    let part = d4::fit_partition(&pool, cfg.gamma, cfg.levels)?;
    super::at_path(io::save_partition(&part, &out), &out)?;
    println!(
        "fit-d4: gamma={} levels={} boundaries={:?} rep_depths={:?}",
        part.gamma(),
        part.n_levels(),
        part.boundaries(),
        part.rep_depths()
    );
    Ok(())
}
