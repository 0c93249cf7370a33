//! File formats for every artifact the pipeline reads or writes.
//!
//! Binary image formats carry the pixel payloads: PFM for lossless floats,
//! PGM/PPM for 8- and 16-bit integer rasters, PNG through the `image`
//! crate. Text formats carry structure: JSON for partitions, ASCII PLY for
//! clouds, "row col depth" lines for sparse depth, key=value manifests for
//! pyramid dumps, CSV for traces and reports.

use std::path::PathBuf;

use thiserror::Error;

mod partition;
mod pfm;
mod ply;
mod png;
mod pnm;
mod pyramid_dump;
mod sparse;

pub use partition::{load_partition, save_partition};
pub use pfm::{read_depth_pfm, read_pfm, write_depth_pfm, write_pfm};
pub use ply::{read_ply, write_ply};
pub use png::{read_png, write_png};
pub use pnm::{
    read_depth_pgm, read_labels_pgm, read_mask_pgm, read_ppm, write_depth_pgm, write_labels_pgm,
    write_mask_pgm, write_ppm,
};
pub use pyramid_dump::{load_pyramid, save_pyramid};
pub use sparse::{read_sparse_depth, write_sparse_depth};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Pyramid(#[from] crate::pyramid::PyramidError),
    #[error(transparent)]
    Partition(#[from] crate::d4::D4Error),
    #[error(transparent)]
    Geom(#[from] crate::geom::GeomError),
    #[error(transparent)]
    Densify(#[from] crate::densify::DensifyError),
    #[error("png: {0}")]
    Png(String),
}

impl IoError {
    fn parse(path: &std::path::Path, msg: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

/// Writes the per-epoch training trace as `epoch,loss,pixel_acc` CSV.
pub fn write_loss_trace(
    trace: &[crate::convnet::EpochStat],
    path: &std::path::Path,
) -> Result<(), IoError> {
    let mut out = String::from("epoch,loss,pixel_acc\n");
    for stat in trace {
        out.push_str(&format!(
            "{},{},{}\n",
            stat.epoch, stat.loss, stat.pixel_acc
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
