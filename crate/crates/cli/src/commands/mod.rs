//! One module per subcommand, plus the file-format dispatch they share.

pub mod densify;
pub mod eval;
pub mod fit_d4;
pub mod hha;
pub mod infer;
pub mod occupancy;
pub mod pyramid;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use surfconv_core::convnet::Tensor;
use surfconv_core::geom::DepthImage;
use surfconv_core::io;
use surfconv_core::raster::PlanarImage;

use crate::config::Config;

fn require_out(out: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    out.with_context(|| format!("--out is required ({what})"))
}

fn extension(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

/// Prefixes errors with the file they came from; raw OS errors carry no
/// path of their own.
fn at_path<T, E: Into<anyhow::Error>>(res: Result<T, E>, path: &Path) -> Result<T> {
    res.map_err(Into::into)
        .with_context(|| path.display().to_string())
}

/// Reads a depth image, dispatching on extension: .pfm stores meters
/// directly, .pgm stores integer units of 1/depth_divisor meters.
fn read_depth_any(path: &Path, cfg: &Config) -> Result<DepthImage> {
    match extension(path).as_str() {
        "pfm" => at_path(io::read_depth_pfm(path), path),
        "pgm" => at_path(io::read_depth_pgm(path, cfg.depth_divisor), path),
        other => bail!(
            "unsupported depth format '.{other}' for {} (use .pfm or .pgm)",
            path.display()
        ),
    }
}

/// Reads a color or gray image, dispatching on extension.
fn read_image_any(path: &Path) -> Result<PlanarImage> {
    match extension(path).as_str() {
        "ppm" => at_path(io::read_ppm(path), path),
        "pfm" => at_path(io::read_pfm(path), path),
        "png" => at_path(io::read_png(path), path),
        other => bail!(
            "unsupported image format '.{other}' for {} (use .ppm, .pfm, or .png)",
            path.display()
        ),
    }
}

fn read_labels(path: &Path) -> Result<surfconv_core::raster::LabelMap> {
    at_path(io::read_labels_pgm(path), path)
}

/// Widens a CHW image into the f64 tensor the network consumes.
fn tensor_from_image(image: &PlanarImage) -> Result<Tensor> {
    let shape = [image.channels(), image.height(), image.width()];
    let data = image.data().iter().map(|&v| v as f64).collect();
    Ok(Tensor::from_data(&shape, data)?)
}

/// Expands each argument into pyramid dump directories: a directory with a
/// manifest.txt is a dump itself, otherwise its immediate children with
/// manifests are taken, sorted by name for determinism.
fn expand_dumps(args: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut dumps = Vec::new();
    for arg in args {
        if arg.join("manifest.txt").is_file() {
            dumps.push(arg.clone());
            continue;
        }
        let mut children = Vec::new();
        let entries = std::fs::read_dir(arg)
            .with_context(|| format!("reading directory {}", arg.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.join("manifest.txt").is_file() {
                children.push(path);
            }
        }
        if children.is_empty() {
            bail!("{} contains no pyramid dumps", arg.display());
        }
        children.sort();
        dumps.append(&mut children);
    }
    Ok(dumps)
}
