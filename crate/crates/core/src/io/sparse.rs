//! Sparse depth exchange: one "row col depth" ASCII line per sample,
//! `#` comments allowed. Grid dimensions travel outside the file.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::IoError;
use crate::densify::SparseDepth;

pub fn write_sparse_depth(sparse: &SparseDepth, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for &(row, col, z) in sparse.samples() {
        let _ = writeln!(out, "{row} {col} {z}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_sparse_depth(path: &Path, height: usize, width: usize) -> Result<SparseDepth, IoError> {
    let mut samples = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(IoError::parse(
                path,
                format!("line {}: expected 'row col depth'", lineno + 1),
            ));
        }
        let bad = |what: &str| IoError::parse(path, format!("line {}: bad {what}", lineno + 1));
        let row: usize = fields[0].parse().map_err(|_| bad("row"))?;
        let col: usize = fields[1].parse().map_err(|_| bad("col"))?;
        let z: f64 = fields[2].parse().map_err(|_| bad("depth"))?;
        samples.push((row, col, z));
    }
    Ok(SparseDepth::new(height, width, samples)?)
}
