//! Pyramid dumps: one directory holding a key=value manifest, the
//! partition JSON, per-level PFM images with PGM validity masks and
//! optional PGM labels, and the 16-bit PGM ownership map.
//!
//! Every payload format is lossless for its source type, so a dump loads
//! back bit-exactly; `Pyramid::from_parts` revalidates the result.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::pfm::{read_pfm, write_pfm};
use super::pnm::{
    read_labels_pgm, read_mask_pgm, read_pgm_raw, write_labels_pgm, write_mask_pgm, write_pgm_raw,
};
use super::{load_partition, save_partition, IoError};
use crate::pyramid::{level_scales, Pyramid, PyramidLevel};

const MANIFEST: &str = "manifest.txt";
const PARTITION: &str = "partition.json";
const LEVEL_MAP: &str = "levelmap.pgm";

fn level_stem(index: usize) -> String {
    format!("level_{index:02}")
}

pub fn save_pyramid(pyr: &Pyramid, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "height={}", pyr.height());
    let _ = writeln!(manifest, "width={}", pyr.width());
    let _ = writeln!(manifest, "levels={}", pyr.n_levels());
    for level in pyr.levels() {
        let _ = writeln!(manifest, "scale_{}={}", level.level_index, level.scale);
    }
    for (idx, b) in pyr.partition().boundaries().iter().enumerate() {
        let _ = writeln!(manifest, "boundary_{idx}={b}");
    }
    std::fs::write(dir.join(MANIFEST), manifest)?;

    save_partition(pyr.partition(), &dir.join(PARTITION))?;
    write_pgm_raw(
        pyr.level_map(),
        pyr.width(),
        pyr.height(),
        65535,
        &dir.join(LEVEL_MAP),
    )?;
    for level in pyr.levels() {
        let stem = level_stem(level.level_index);
        write_pfm(&level.image, &dir.join(format!("{stem}.pfm")))?;
        write_mask_pgm(&level.valid, &dir.join(format!("{stem}_valid.pgm")))?;
        if let Some(labels) = &level.labels {
            write_labels_pgm(labels, &dir.join(format!("{stem}_labels.pgm")))?;
        }
    }
    Ok(())
}

pub fn load_pyramid(dir: &Path) -> Result<Pyramid, IoError> {
    let manifest_path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path)?;
    let mut fields: HashMap<&str, &str> = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| IoError::parse(&manifest_path, format!("bad line {line:?}")))?;
        fields.insert(key.trim(), value.trim());
    }
    let field = |key: &str| -> Result<usize, IoError> {
        fields
            .get(key)
            .ok_or_else(|| IoError::parse(&manifest_path, format!("missing {key}")))?
            .parse()
            .map_err(|_| IoError::parse(&manifest_path, format!("bad {key}")))
    };
    let height = field("height")?;
    let width = field("width")?;
    let n_levels = field("levels")?;

    let partition = load_partition(&dir.join(PARTITION))?;
    let scales = level_scales(&partition);

    let map_path = dir.join(LEVEL_MAP);
    let (level_map, map_w, map_h, _) = read_pgm_raw(&map_path)?;
    if map_h != height || map_w != width {
        return Err(IoError::parse(
            &map_path,
            format!("level map is {map_h}x{map_w}, manifest says {height}x{width}"),
        ));
    }

    let mut levels = Vec::with_capacity(n_levels);
    for idx in 1..=n_levels {
        let stem = level_stem(idx);
        let image = read_pfm(&dir.join(format!("{stem}.pfm")))?;
        let valid = read_mask_pgm(&dir.join(format!("{stem}_valid.pgm")))?;
        let labels_path = dir.join(format!("{stem}_labels.pgm"));
        let labels = if labels_path.exists() {
            Some(read_labels_pgm(&labels_path)?)
        } else {
            None
        };
        levels.push(PyramidLevel {
            level_index: idx,
            scale: *scales
                .get(idx - 1)
                .ok_or_else(|| IoError::parse(&manifest_path, "more levels than partition bins"))?,
            image,
            valid,
            labels,
        });
    }
    Ok(Pyramid::from_parts(
        levels, partition, height, width, level_map,
    )?)
}
