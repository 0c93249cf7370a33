//! Pipeline configuration: built-in defaults, overridden by a flat
//! key=value file, overridden in turn by command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use surfconv_core::convnet::LossMode;
use surfconv_core::geom::CameraModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    // Camera intrinsics; pixel centers sit on integer coordinates.
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// One stored PGM depth unit equals 1/depth_divisor meters.
    pub depth_divisor: f64,
    /// Unit gravity direction in the camera frame (y points down).
    pub gravity: [f64; 3],
    pub ground_height: f64,
    pub height_range: f64,
    /// D4 importance exponent.
    pub gamma: f64,
    /// Number of discretization levels.
    pub levels: usize,
    /// Surface receptive-field radius in meters.
    pub delta_sf: f64,
    /// Densify: longest admissible triangle edge in pixels.
    pub max_edge: f64,
    /// Densify: largest admissible depth gap across a triangle in meters.
    pub max_depth_gap: f64,
    pub loss: LossMode,
    pub seed: u64,
    /// Keep RGB outside each level's mask instead of zeroing it.
    pub keep_context: bool,
    pub epochs: usize,
    pub lr: f64,
    /// Hidden channel widths of the SegNet, front to back.
    pub hidden: Vec<usize>,
    /// Side of the hidden convolution kernels (odd).
    pub kernel: usize,
    /// Additive Gaussian image noise for synth, in intensity units.
    pub noise_sigma: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
            depth_divisor: 1000.0,
            gravity: [0.0, -1.0, 0.0],
            ground_height: 0.0,
            height_range: 3.0,
            gamma: 1.0,
            levels: 3,
            delta_sf: 0.25,
            max_edge: 20.0,
            max_depth_gap: 1.0,
            loss: LossMode::Uniform,
            seed: 0,
            keep_context: false,
            epochs: 40,
            lr: 0.2,
            hidden: vec![8],
            kernel: 5,
            noise_sigma: 0.0,
        }
    }
}

impl Config {
    /// Applies a key=value file on top of the current values. Blank lines
    /// and lines starting with `#` are skipped; unknown keys are errors.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), idx + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "fx" => self.fx = parse(key, value)?,
            "fy" => self.fy = parse(key, value)?,
            "cx" => self.cx = parse(key, value)?,
            "cy" => self.cy = parse(key, value)?,
            "width" => self.width = parse(key, value)?,
            "height" => self.height = parse(key, value)?,
            "depth_divisor" => self.depth_divisor = parse(key, value)?,
            "gravity" => self.gravity = parse_triple(value)?,
            "ground_height" => self.ground_height = parse(key, value)?,
            "height_range" => self.height_range = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "levels" => self.levels = parse(key, value)?,
            "delta_sf" => self.delta_sf = parse(key, value)?,
            "max_edge" => self.max_edge = parse(key, value)?,
            "max_depth_gap" => self.max_depth_gap = parse(key, value)?,
            "loss" => self.loss = parse_loss(value)?,
            "seed" => self.seed = parse(key, value)?,
            "keep_context" => self.keep_context = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "hidden" => self.hidden = parse_list(value)?,
            "kernel" => self.kernel = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    pub fn camera(&self) -> Result<CameraModel> {
        CameraModel::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            .context("config camera")
    }
}

pub fn parse_loss(value: &str) -> Result<LossMode> {
    match value {
        "uniform" => Ok(LossMode::Uniform),
        "r" => Ok(LossMode::ImageAreaReweighted),
        other => bail!("loss must be 'uniform' or 'r', got '{other}'"),
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("key '{key}': bad value '{value}': {e}"))
}

fn parse_triple(value: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("expected three comma-separated numbers, got '{value}'");
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = parse("gravity", part)?;
    }
    Ok(out)
}

fn parse_list(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|part| parse("hidden", part.trim()))
        .collect()
}
