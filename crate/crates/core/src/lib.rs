//! Depth-aware multi-scale processing of single-frame RGBD data.
//!
//! The pipeline turns a dense depth image plus RGB into a small stack of
//! rescaled, depth-masked images ("levels") on which an ordinary 2D
//! convolution behaves like a convolution slid along the visible 3D surface:
//! a filter of fixed pixel size covers a constant physical extent at every
//! level's representative depth, so an object keeps its apparent size no
//! matter how far it sits from the camera.
//!
//! Modules:
//! - [`geom`] — pinhole camera model, projection/backprojection, depth image
//!   and point cloud containers, receptive-field geometry.
//! - [`d4`] — data-driven depth discretization: equal-importance level
//!   boundaries under the importance weighting `z^gamma`.
//! - [`pyramid`] — building the per-level image stack and reassembling
//!   per-level predictions into a full-resolution label map.
//! - [`densify`] — sparse LIDAR samples to dense depth via triangulation
//!   and rasterization.
//! - [`encode`] — HHA-style depth channels and per-pixel surface-area
//!   weights.
//! - [`convnet`] — a minimal float64 convolution engine with analytic
//!   gradients, shared-weight training across levels, and the
//!   image-area-reweighted loss variant.
//! - [`eval`] — image-wise and surface-weighted segmentation metrics, plus
//!   a voxel-occupancy sparsity benchmark.
//! - [`io`] — PFM/PGM/PPM/PNG/PLY readers and writers, partition records,
//!   pyramid dumps.
//! - [`synth`] — deterministic synthetic scene rendering for tests and
//!   benchmarks.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convnet;
pub mod d4;
pub mod densify;
pub mod encode;
pub mod eval;
pub mod geom;
pub mod io;
pub mod pyramid;
pub mod raster;
pub mod synth;

pub use d4::LevelPartition;
pub use geom::{CameraModel, DepthImage, ImagePoint, Point3, PointCloud};
pub use pyramid::Pyramid;
pub use raster::{LabelMap, Mask, PlanarImage, IGNORE_LABEL};
