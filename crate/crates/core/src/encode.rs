//! Auxiliary input encodings: HHA-style geometric channels and per-pixel
//! surface-area weights.
//!
//! The weight of a pixel is the 3D surface area its footprint covers under
//! the local planarity assumption: a fronto-parallel patch at depth `z`
//! covers `z² / (fx·fy)` square meters. This is the same `z²` that makes
//! `gamma = 2` discretization balance surface area across levels.

use thiserror::Error;

use crate::geom::{backproject, CameraModel, DepthImage, ImagePoint};
use crate::raster::{Mask, PlanarImage};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("gravity must be a unit vector, got length {0}")]
    InvalidGravity(f64),
    #[error("height range must be positive, got {0}")]
    InvalidRange(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("depth image too degenerate for HHA (no pixel has a computable normal)")]
    DegenerateDepth,
    #[error("surface weights must be finite and non-negative, got {0}")]
    InvalidWeight(f64),
}

/// HHA parameters. Gravity is supplied, never estimated; the default points
/// along -y. Heights are measured against the plane `dot(p, -gravity) =
/// ground_height` and normalized by `height_range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhaParams {
    pub gravity: [f64; 3],
    pub ground_height: f64,
    pub height_range: f64,
}

impl Default for HhaParams {
    fn default() -> Self {
        Self {
            gravity: [0.0, -1.0, 0.0],
            ground_height: 0.0,
            height_range: 3.0,
        }
    }
}

/// Three channels in [0, 1]: disparity (per-image min-max), height above
/// ground, angle with the up direction over pi. Pixels without a valid
/// depth or a computable normal are zero in all channels and false in the
/// mask.
#[derive(Debug, Clone, PartialEq)]
pub struct HhaImage {
    pub image: PlanarImage,
    pub valid: Mask,
}

/// Per-pixel 3D surface area (square meters); 0 on invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceWeightMap {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl SurfaceWeightMap {
    /// Builds a map from explicit weights; they must be finite and
    /// non-negative, with a zero marking an invalid pixel.
    pub fn from_weights(
        height: usize,
        width: usize,
        weights: Vec<f64>,
    ) -> Result<Self, EncodeError> {
        if weights.len() != height * width {
            return Err(EncodeError::DimensionMismatch(format!(
                "{} weights for a {height}x{width} map",
                weights.len()
            )));
        }
        if let Some(&bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(EncodeError::InvalidWeight(bad));
        }
        Ok(Self {
            height,
            width,
            weights,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.weights
    }
}

/// Unit camera-facing surface normals by central differences on the
/// backprojected neighbors; `None` where the pixel or any of its four
/// neighbors has no depth.
pub fn estimate_normals(depth: &DepthImage, cam: &CameraModel) -> Vec<Option<[f64; 3]>> {
    let (h, w) = (depth.height(), depth.width());
    let point = |r: usize, c: usize| {
        let z = depth.get(r, c);
        backproject(cam, ImagePoint::new(c as f64, r as f64), z).expect("valid depth")
    };
    let mut normals = vec![None; h * w];
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            let ok = depth.is_valid(r, c)
                && depth.is_valid(r, c - 1)
                && depth.is_valid(r, c + 1)
                && depth.is_valid(r - 1, c)
                && depth.is_valid(r + 1, c);
            if !ok {
                continue;
            }
            let (px, nx) = (point(r, c + 1), point(r, c - 1));
            let (py, ny) = (point(r + 1, c), point(r - 1, c));
            let dx = [px.x - nx.x, px.y - nx.y, px.z - nx.z];
            let dy = [py.x - ny.x, py.y - ny.y, py.z - ny.z];
            let mut n = [
                dx[1] * dy[2] - dx[2] * dy[1],
                dx[2] * dy[0] - dx[0] * dy[2],
                dx[0] * dy[1] - dx[1] * dy[0],
            ];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if !(len > 0.0 && len.is_finite()) {
                continue;
            }
            for v in &mut n {
                *v /= len;
            }
            // The visible side faces the camera.
            let p = point(r, c);
            if n[0] * p.x + n[1] * p.y + n[2] * p.z > 0.0 {
                for v in &mut n {
                    *v = -*v;
                }
            }
            normals[r * w + c] = Some(n);
        }
    }
    normals
}

/// Computes the HHA encoding of a depth image.
pub fn hha(
    depth: &DepthImage,
    cam: &CameraModel,
    params: &HhaParams,
) -> Result<HhaImage, EncodeError> {
    let g = params.gravity;
    let g_len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if (g_len - 1.0).abs() > 1e-6 {
        return Err(EncodeError::InvalidGravity(g_len));
    }
    if !(params.height_range > 0.0 && params.height_range.is_finite()) {
        return Err(EncodeError::InvalidRange(params.height_range));
    }
    if cam.height != depth.height() || cam.width != depth.width() {
        return Err(EncodeError::DimensionMismatch(format!(
            "camera {}x{} vs depth {}x{}",
            cam.height,
            cam.width,
            depth.height(),
            depth.width()
        )));
    }

    let (h, w) = (depth.height(), depth.width());
    let up = [-g[0], -g[1], -g[2]];
    let normals = estimate_normals(depth, cam);
    if normals.iter().all(|n| n.is_none()) {
        return Err(EncodeError::DegenerateDepth);
    }

    // Disparity normalization over pixels that will be emitted.
    let mut d_min = f64::INFINITY;
    let mut d_max = f64::NEG_INFINITY;
    for r in 0..h {
        for c in 0..w {
            if normals[r * w + c].is_some() {
                let d = 1.0 / depth.get(r, c);
                d_min = d_min.min(d);
                d_max = d_max.max(d);
            }
        }
    }
    let d_span = d_max - d_min;

    let mut image = PlanarImage::zeros(3, h, w);
    let mut valid = Mask::filled(h, w, false);
    for r in 0..h {
        for c in 0..w {
            let Some(n) = normals[r * w + c] else {
                continue;
            };
            let z = depth.get(r, c);
            let disparity = if d_span > 0.0 {
                ((1.0 / z - d_min) / d_span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let p = backproject(cam, ImagePoint::new(c as f64, r as f64), z).expect("valid depth");
            let elevation = p.x * up[0] + p.y * up[1] + p.z * up[2] - params.ground_height;
            let height = (elevation / params.height_range).clamp(0.0, 1.0);
            let cos = (n[0] * up[0] + n[1] * up[1] + n[2] * up[2]).clamp(-1.0, 1.0);
            let angle = cos.acos() / std::f64::consts::PI;

            image.set(0, r, c, disparity as f32);
            image.set(1, r, c, height as f32);
            image.set(2, r, c, angle as f32);
            valid.set(r, c, true);
        }
    }
    Ok(HhaImage { image, valid })
}

/// Frontal-parallel surface area per pixel: `z² / (fx·fy)` on valid pixels,
/// 0 elsewhere.
pub fn surface_weights(depth: &DepthImage, cam: &CameraModel) -> SurfaceWeightMap {
    let (h, w) = (depth.height(), depth.width());
    let inv_ff = 1.0 / (cam.fx * cam.fy);
    let weights = depth
        .data()
        .iter()
        .map(|&z| if z > 0.0 { z * z * inv_ff } else { 0.0 })
        .collect();
    SurfaceWeightMap {
        height: h,
        width: w,
        weights,
    }
}

/// Obliquity-corrected variant: divides the frontal footprint by the cosine
/// of the angle between the surface normal and the view ray, clamped at 0.2
/// to avoid grazing-angle blowup. Pixels without a computable normal keep
/// the frontal value.
pub fn surface_weights_oblique(depth: &DepthImage, cam: &CameraModel) -> SurfaceWeightMap {
    let mut map = surface_weights(depth, cam);
    let normals = estimate_normals(depth, cam);
    let (h, w) = (depth.height(), depth.width());
    for r in 0..h {
        for c in 0..w {
            let Some(n) = normals[r * w + c] else {
                continue;
            };
            let z = depth.get(r, c);
            let p = backproject(cam, ImagePoint::new(c as f64, r as f64), z).expect("valid depth");
            let p_len = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
            // The camera-facing normal has dot(n, p) <= 0; the cosine of the
            // incidence angle is its magnitude.
            let cos = (-(n[0] * p.x + n[1] * p.y + n[2] * p.z) / p_len).clamp(0.0, 1.0);
            map.weights[r * w + c] /= cos.max(0.2);
        }
    }
    map
}
