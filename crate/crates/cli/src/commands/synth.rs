//! Scene rendering: a JSON scene spec or a named built-in, out to
//! rgb.ppm + depth.pfm + labels.pgm (+ the spec that produced them).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfconv_core::io;
use surfconv_core::synth::{self, Rendered, SceneSpec};

use crate::config::Config;

#[derive(Args)]
pub struct SynthArgs {
    /// Scene spec JSON file.
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "builtin",
        conflicts_with = "builtin"
    )]
    scene: Option<PathBuf>,
    /// Built-in scene: two-plane, textured-square, or depth-spread.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Depth of the textured-square built-in, in meters.
    #[arg(long, default_value_t = 2.0)]
    square_depth: f64,
    /// Number of scenes to render; scene i uses seed + i.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

pub fn run(args: &SynthArgs, cfg: &Config, out: Option<PathBuf>) -> Result<()> {
    let out = super::require_out(out, "output directory")?;
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    for i in 0..args.count {
        let seed = cfg.seed.wrapping_add(i as u64);
        let spec = make_spec(args, seed)?;
        let rendered = synth::render_with_noise(&spec, cfg.noise_sigma, seed)?;
        let dir = if args.count == 1 {
            out.clone()
        } else {
            out.join(format!("scene_{i:03}"))
        };
        write_scene(&spec, &rendered, &dir)?;
    }
    println!("synth: wrote {} scene(s) to {}", args.count, out.display());
    Ok(())
}

fn make_spec(args: &SynthArgs, seed: u64) -> Result<SceneSpec> {
    if let Some(path) = &args.scene {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scene {}", path.display()))?;
        let spec = serde_json::from_str(&text)
            .with_context(|| format!("parsing scene {}", path.display()))?;
        return Ok(spec);
    }
    match args.builtin.as_deref() {
        Some("two-plane") => Ok(synth::two_plane_scene()),
        Some("textured-square") => Ok(synth::textured_square_scene(args.square_depth)),
        Some("depth-spread") => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(synth::depth_spread_scene(&mut rng))
        }
        Some(other) => {
            bail!("unknown builtin '{other}' (two-plane, textured-square, depth-spread)")
        }
        None => unreachable!("clap enforces --scene or --builtin"),
    }
}

fn write_scene(spec: &SceneSpec, rendered: &Rendered, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    super::at_path(io::write_ppm(&rendered.image, &dir.join("rgb.ppm")), dir)?;
    super::at_path(
        io::write_depth_pfm(&rendered.depth, &dir.join("depth.pfm")),
        dir,
    )?;
    super::at_path(
        io::write_labels_pgm(&rendered.labels, &dir.join("labels.pgm")),
        dir,
    )?;
    let json = serde_json::to_string_pretty(spec).context("serializing scene spec")?;
    std::fs::write(dir.join("scene.json"), json + "\n")
        .with_context(|| format!("writing {}", dir.join("scene.json").display()))?;
    Ok(())
}
