//! Sparse-to-dense depth: triangulate the samples, rasterize the mesh,
//! write the dense image as PFM.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use surfconv_core::densify::{rasterize, triangulate};
use surfconv_core::io;

use crate::config::Config;

#[derive(Args)]
pub struct DensifyArgs {
    /// Sparse samples, one "row col depth" line each.
    #[arg(long, value_name = "FILE")]
    sparse: PathBuf,
    /// Target width in pixels (defaults to the config camera width).
    #[arg(long)]
    width: Option<usize>,
    /// Target height in pixels (defaults to the config camera height).
    #[arg(long)]
    height: Option<usize>,
}

pub fn run(args: &DensifyArgs, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "dense depth PFM path")?;
    let width = args.width.unwrap_or(cfg.width);
    let height = args.height.unwrap_or(cfg.height);
    let sparse = super::at_path(
        io::read_sparse_depth(&args.sparse, height, width),
        &args.sparse,
    )?;
    let mesh = triangulate(&sparse, cfg.max_edge, cfg.max_depth_gap)?;
    let dense = rasterize(&mesh, width, height);
    super::at_path(io::write_depth_pfm(&dense, &out), &out)?;
    println!(
        "densify: {} samples, {} triangles, {}/{} pixels filled -> {}",
        sparse.len(),
        mesh.triangles().len(),
        dense.valid_count(),
        width * height,
        out.display()
    );
    Ok(())
}
