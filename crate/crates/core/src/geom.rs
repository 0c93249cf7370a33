//! Pinhole camera geometry and the containers it operates on.
//!
//! Conventions, fixed once for the whole crate:
//! - Camera frame: `x` right, `y` along image rows (increasing downward),
//!   `z` forward along the principal axis. Only points with `z > 0` project.
//! - Image coordinates: `i` runs along columns, `j` along rows (downward).
//!   Pixel `(row, col)` of an image samples the continuous image point
//!   `(i, j) = (col, row)`; there is no half-pixel offset, which keeps
//!   project/backproject roundtrips exact.
//! - Invalid depth pixels carry the sentinel value `0`; any non-positive or
//!   non-finite depth in an input marks the pixel invalid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::PlanarImage;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid camera parameters: {0}")]
    InvalidCamera(String),
}

/// Pinhole intrinsics. The normalized model (`fx = fy = 1`, `cx = cy = 0`)
/// makes projection exactly `i = x/z`, `j = y/z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeomError> {
        if !(fx > 0.0 && fx.is_finite()) || !(fy > 0.0 && fy.is_finite()) {
            return Err(GeomError::InvalidCamera(format!(
                "focal lengths must be positive and finite, got fx={fx}, fy={fy}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(GeomError::InvalidCamera(format!(
                "principal point must be finite, got cx={cx}, cy={cy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeomError::InvalidCamera(format!(
                "image size must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// The same sensor with focal length rescaled to 1 and the principal
    /// point at the origin.
    pub fn normalized(&self) -> CameraModel {
        CameraModel {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
            width: self.width,
            height: self.height,
        }
    }
}

/// A 3D point in the camera frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// A continuous image-plane position (`i` along columns, `j` along rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub i: f64,
    pub j: f64,
}

impl ImagePoint {
    pub fn new(i: f64, j: f64) -> Self {
        Self { i, j }
    }
}

/// Dense per-pixel depth in meters. `0` is the invalid sentinel; validity
/// and the stored value are kept consistent by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    height: usize,
    width: usize,
    depth: Vec<f64>,
}

impl DepthImage {
    /// Builds a depth image, mapping any non-positive or non-finite input
    /// value to the invalid sentinel.
    pub fn from_data(height: usize, width: usize, depth: Vec<f64>) -> Self {
        assert_eq!(depth.len(), height * width, "depth length mismatch");
        let depth = depth
            .into_iter()
            .map(|d| if d > 0.0 && d.is_finite() { d } else { 0.0 })
            .collect();
        Self {
            height,
            width,
            depth,
        }
    }

    /// An image with every pixel invalid.
    pub fn invalid(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            depth: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.width + col]
    }

    /// Sets a pixel; non-positive or non-finite values mark it invalid.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let v = if value > 0.0 && value.is_finite() {
            value
        } else {
            0.0
        };
        self.depth[row * self.width + col] = v;
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.get(row, col) > 0.0
    }

    pub fn data(&self) -> &[f64] {
        &self.depth
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d > 0.0).count()
    }

    /// Depths of all valid pixels, in row-major pixel order.
    pub fn valid_depths(&self) -> Vec<f64> {
        self.depth.iter().copied().filter(|&d| d > 0.0).collect()
    }
}

/// Unordered 3D points with optional per-point color and class label.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub color: Option<Vec<[f32; 3]>>,
    pub label: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(
        points: Vec<Point3>,
        color: Option<Vec<[f32; 3]>>,
        label: Option<Vec<u32>>,
    ) -> Result<Self, GeomError> {
        if let Some(c) = &color {
            if c.len() != points.len() {
                return Err(GeomError::DimensionMismatch(format!(
                    "{} colors for {} points",
                    c.len(),
                    points.len()
                )));
            }
        }
        if let Some(l) = &label {
            if l.len() != points.len() {
                return Err(GeomError::DimensionMismatch(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        Ok(Self {
            points,
            color,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Which neighborhood definition a receptive field uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RfKind {
    /// Fixed pixel radius on the image plane, independent of depth.
    Image,
    /// Fixed metric radius in 3D; a cuboid around the center point.
    Volume,
    /// Fixed metric radius along the surface; projects to an image square
    /// whose size shrinks with the center point's depth.
    Surface,
}

/// A receptive-field specification: the kind plus the radius (pixels for
/// [`RfKind::Image`], meters for the other two).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptiveFieldSpec {
    pub kind: RfKind,
    pub radius: f64,
}

impl ReceptiveFieldSpec {
    pub fn new(kind: RfKind, radius: f64) -> Result<Self, GeomError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeomError::InvalidCamera(format!(
                "receptive field radius must be positive, got {radius}"
            )));
        }
        Ok(Self { kind, radius })
    }
}

/// Axis-aligned rectangle on the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageRect {
    pub i_min: f64,
    pub i_max: f64,
    pub j_min: f64,
    pub j_max: f64,
}

impl ImageRect {
    pub fn half_width(&self) -> f64 {
        (self.i_max - self.i_min) / 2.0
    }

    pub fn half_height(&self) -> f64 {
        (self.j_max - self.j_min) / 2.0
    }
}

/// Axis-aligned cuboid in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    pub min: Point3,
    pub max: Point3,
}

/// The realized receptive field of a point: an image-plane rectangle for
/// the image and surface kinds, a 3D cuboid for the volume kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceptiveField {
    ImagePlane(ImageRect),
    Volume(Cuboid),
}

/// Perspective projection of a 3D point onto the image plane.
pub fn project(cam: &CameraModel, p: Point3) -> Result<ImagePoint, GeomError> {
    if !(p.z > 0.0) {
        return Err(GeomError::NonPositiveDepth(p.z));
    }
    Ok(ImagePoint {
        i: cam.fx * p.x / p.z + cam.cx,
        j: cam.fy * p.y / p.z + cam.cy,
    })
}

/// Inverse of [`project`]: the 3D point at depth `z` along the ray through
/// image point `q`.
pub fn backproject(cam: &CameraModel, q: ImagePoint, z: f64) -> Result<Point3, GeomError> {
    if !(z > 0.0) {
        return Err(GeomError::NonPositiveDepth(z));
    }
    Ok(Point3 {
        x: (q.i - cam.cx) * z / cam.fx,
        y: (q.j - cam.cy) * z / cam.fy,
        z,
    })
}

/// Backprojects every valid depth pixel into a point cloud, in row-major
/// pixel order. `color`, when given, must match the depth dimensions and
/// have 1 or 3 channels; per-point colors are replicated from gray.
pub fn cloud_from_depth(
    cam: &CameraModel,
    depth: &DepthImage,
    color: Option<&PlanarImage>,
) -> Result<PointCloud, GeomError> {
    if let Some(img) = color {
        if img.height() != depth.height() || img.width() != depth.width() {
            return Err(GeomError::DimensionMismatch(format!(
                "color {}x{} vs depth {}x{}",
                img.height(),
                img.width(),
                depth.height(),
                depth.width()
            )));
        }
        if img.channels() != 1 && img.channels() != 3 {
            return Err(GeomError::DimensionMismatch(format!(
                "color image must have 1 or 3 channels, got {}",
                img.channels()
            )));
        }
    }

    let mut points = Vec::with_capacity(depth.valid_count());
    let mut colors = color.map(|_| Vec::with_capacity(depth.valid_count()));
    for row in 0..depth.height() {
        for col in 0..depth.width() {
            let z = depth.get(row, col);
            if z <= 0.0 {
                continue;
            }
            let q = ImagePoint::new(col as f64, row as f64);
            points.push(backproject(cam, q, z)?);
            if let (Some(out), Some(img)) = (&mut colors, color) {
                let rgb = if img.channels() == 3 {
                    [
                        img.get(0, row, col),
                        img.get(1, row, col),
                        img.get(2, row, col),
                    ]
                } else {
                    let g = img.get(0, row, col);
                    [g, g, g]
                };
                out.push(rgb);
            }
        }
    }
    PointCloud::new(points, colors, None)
}

/// The receptive field of `center` under `spec`.
///
/// The surface kind scales the metric radius by `f/z`, one factor per image
/// axis, so the resulting image region covers a constant physical extent on
/// a fronto-parallel patch at the center's depth.
pub fn receptive_field(
    spec: ReceptiveFieldSpec,
    cam: &CameraModel,
    center: Point3,
) -> Result<ReceptiveField, GeomError> {
    if !(center.z > 0.0) {
        return Err(GeomError::NonPositiveDepth(center.z));
    }
    match spec.kind {
        RfKind::Image => {
            let c = project(cam, center)?;
            Ok(ReceptiveField::ImagePlane(ImageRect {
                i_min: c.i - spec.radius,
                i_max: c.i + spec.radius,
                j_min: c.j - spec.radius,
                j_max: c.j + spec.radius,
            }))
        }
        RfKind::Volume => Ok(ReceptiveField::Volume(Cuboid {
            min: Point3::new(
                center.x - spec.radius,
                center.y - spec.radius,
                center.z - spec.radius,
            ),
            max: Point3::new(
                center.x + spec.radius,
                center.y + spec.radius,
                center.z + spec.radius,
            ),
        })),
        RfKind::Surface => {
            let c = project(cam, center)?;
            let half_i = cam.fx * spec.radius / center.z;
            let half_j = cam.fy * spec.radius / center.z;
            Ok(ReceptiveField::ImagePlane(ImageRect {
                i_min: c.i - half_i,
                i_max: c.i + half_i,
                j_min: c.j - half_j,
                j_max: c.j + half_j,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn normalized_cam() -> CameraModel {
        CameraModel::new(1.0, 1.0, 0.0, 0.0, 64, 64).unwrap()
    }

    #[test]
    fn project_normalized_is_x_over_z() {
        let cam = normalized_cam();
        let q = project(&cam, Point3::new(2.0, 1.0, 2.0)).unwrap();
        assert_eq!(q.i, 1.0);
        assert_eq!(q.j, 0.5);
    }

    #[test]
    fn project_principal_ray_hits_principal_point() {
        let cam = normalized_cam();
        let q = project(&cam, Point3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!((q.i, q.j), (0.0, 0.0));
    }

    #[test]
    fn project_with_full_intrinsics() {
        let cam = CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        // Hand check: i = 100*1/2 + 50 = 100, j = 100*(-1)/2 + 50 = 0.
        let q = project(&cam, Point3::new(1.0, -1.0, 2.0)).unwrap();
        assert_eq!((q.i, q.j), (100.0, 0.0));
    }

    #[test]
    fn project_rejects_non_positive_depth() {
        let cam = normalized_cam();
        assert!(matches!(
            project(&cam, Point3::new(0.0, 0.0, 0.0)),
            Err(GeomError::NonPositiveDepth(_))
        ));
        assert!(project(&cam, Point3::new(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn backproject_inverts_project() {
        let cam = normalized_cam();
        let p = backproject(&cam, ImagePoint::new(1.0, 0.5), 2.0).unwrap();
        assert_eq!((p.x, p.y, p.z), (2.0, 1.0, 2.0));
    }

    #[test]
    fn backproject_principal_point_is_principal_ray() {
        let cam = CameraModel::new(320.0, 330.0, 310.0, 250.0, 640, 480).unwrap();
        let p = backproject(&cam, ImagePoint::new(310.0, 250.0), 7.0).unwrap();
        assert_eq!((p.x, p.y, p.z), (0.0, 0.0, 7.0));
    }

    #[test]
    fn camera_rejects_bad_parameters() {
        assert!(CameraModel::new(0.0, 1.0, 0.0, 0.0, 4, 4).is_err());
        assert!(CameraModel::new(1.0, -2.0, 0.0, 0.0, 4, 4).is_err());
        assert!(CameraModel::new(1.0, 1.0, 0.0, 0.0, 0, 4).is_err());
        assert!(CameraModel::new(1.0, 1.0, f64::NAN, 0.0, 4, 4).is_err());
    }

    #[test]
    fn normalized_model_resets_intrinsics() {
        let cam = CameraModel::new(500.0, 510.0, 320.0, 240.0, 640, 480).unwrap();
        let n = cam.normalized();
        assert_eq!((n.fx, n.fy, n.cx, n.cy), (1.0, 1.0, 0.0, 0.0));
        assert_eq!((n.width, n.height), (640, 480));
    }

    #[test]
    fn cloud_from_depth_backprojects_every_valid_pixel() {
        let cam = normalized_cam();
        let d = DepthImage::from_data(2, 2, vec![1.0; 4]);
        let cloud = cloud_from_depth(&cam, &d, None).unwrap();
        assert_eq!(cloud.len(), 4);
        assert!(cloud.points.iter().all(|p| p.z == 1.0));
    }

    #[test]
    fn cloud_from_depth_skips_invalid_pixels() {
        let cam = normalized_cam();
        let d = DepthImage::from_data(2, 2, vec![1.0, 0.0, 2.0, 3.0]);
        let cloud = cloud_from_depth(&cam, &d, None).unwrap();
        assert_eq!(cloud.len(), 3);
    }

    #[test]
    fn cloud_from_depth_points_lie_on_plane() {
        // A constant-depth image backprojects onto the plane z = 2.
        let cam = CameraModel::new(64.0, 64.0, 32.0, 32.0, 64, 64).unwrap();
        let d = DepthImage::from_data(64, 64, vec![2.0; 64 * 64]);
        let cloud = cloud_from_depth(&cam, &d, None).unwrap();
        assert_eq!(cloud.len(), 64 * 64);
        for p in &cloud.points {
            assert!((p.z - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cloud_from_depth_rejects_mismatched_color() {
        let cam = normalized_cam();
        let d = DepthImage::from_data(2, 2, vec![1.0; 4]);
        let img = PlanarImage::zeros(3, 3, 2);
        assert!(matches!(
            cloud_from_depth(&cam, &d, Some(&img)),
            Err(GeomError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn depth_image_sanitizes_sentinels() {
        let d = DepthImage::from_data(1, 4, vec![1.5, -2.0, f64::NAN, 0.0]);
        assert!(d.is_valid(0, 0));
        assert!(!d.is_valid(0, 1));
        assert!(!d.is_valid(0, 2));
        assert!(!d.is_valid(0, 3));
        assert_eq!(d.valid_count(), 1);
        assert_eq!(d.get(0, 1), 0.0);
    }

    #[test]
    fn surface_field_shrinks_with_depth() {
        let cam = normalized_cam();
        let spec = ReceptiveFieldSpec::new(RfKind::Surface, 1.0).unwrap();
        let near = receptive_field(spec, &cam, Point3::new(0.0, 0.0, 2.0)).unwrap();
        let far = receptive_field(spec, &cam, Point3::new(0.0, 0.0, 4.0)).unwrap();
        let (ReceptiveField::ImagePlane(a), ReceptiveField::ImagePlane(b)) = (near, far) else {
            panic!("surface kind must yield an image rectangle");
        };
        assert!((a.half_width() - 0.5).abs() < 1e-12);
        // Doubling the depth halves the image-plane half-side.
        assert!((b.half_width() - 0.25).abs() < 1e-12);
        assert!((a.half_width() * 2.0 - b.half_width() * 4.0).abs() < 1e-12);
    }

    #[test]
    fn image_field_ignores_depth() {
        let cam = CameraModel::new(50.0, 50.0, 10.0, 10.0, 100, 100).unwrap();
        let spec = ReceptiveFieldSpec::new(RfKind::Image, 3.0).unwrap();
        for z in [0.5, 2.0, 40.0] {
            let rf = receptive_field(spec, &cam, Point3::new(0.1, -0.2, z)).unwrap();
            let ReceptiveField::ImagePlane(r) = rf else {
                panic!("image kind must yield an image rectangle");
            };
            assert!((r.half_width() - 3.0).abs() < 1e-12);
            assert!((r.half_height() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_field_is_metric_cuboid() {
        let cam = normalized_cam();
        let spec = ReceptiveFieldSpec::new(RfKind::Volume, 0.5).unwrap();
        let rf = receptive_field(spec, &cam, Point3::new(1.0, 2.0, 3.0)).unwrap();
        let ReceptiveField::Volume(c) = rf else {
            panic!("volume kind must yield a cuboid");
        };
        assert_eq!((c.min.x, c.min.y, c.min.z), (0.5, 1.5, 2.5));
        assert_eq!((c.max.x, c.max.y, c.max.z), (1.5, 2.5, 3.5));
    }

    proptest! {
        #[test]
        fn roundtrip_project_backproject(
            i in -2000.0f64..2000.0,
            j in -2000.0f64..2000.0,
            z in 0.05f64..100.0,
            fx in 10.0f64..2000.0,
            fy in 10.0f64..2000.0,
            cx in -500.0f64..500.0,
            cy in -500.0f64..500.0,
        ) {
            let cam = CameraModel::new(fx, fy, cx, cy, 640, 480).unwrap();
            let q = ImagePoint::new(i, j);
            let p = backproject(&cam, q, z).unwrap();
            let q2 = project(&cam, p).unwrap();
            prop_assert!((q2.i - q.i).abs() < 1e-9, "i error {}", (q2.i - q.i).abs());
            prop_assert!((q2.j - q.j).abs() < 1e-9, "j error {}", (q2.j - q.j).abs());
            prop_assert_eq!(p.z, z);
        }

        #[test]
        fn surface_half_side_times_depth_is_constant(z in 0.1f64..50.0) {
            let cam = CameraModel::new(75.0, 75.0, 0.0, 0.0, 64, 64).unwrap();
            let spec = ReceptiveFieldSpec::new(RfKind::Surface, 1.3).unwrap();
            let rf = receptive_field(spec, &cam, Point3::new(0.0, 0.0, z)).unwrap();
            let ReceptiveField::ImagePlane(r) = rf else { unreachable!() };
            prop_assert!((r.half_width() * z - 75.0 * 1.3).abs() < 1e-9);
        }
    }
}
