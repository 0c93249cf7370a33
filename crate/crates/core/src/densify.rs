//! Sparse depth densification: join adjacent samples into mesh triangles
//! and rasterize interpolated depth back onto the pixel grid.
//!
//! "Adjacent" is realized as a Delaunay triangulation of the sample pixel
//! coordinates with two rejection filters: triangles with an edge longer
//! than `max_edge` pixels (holes stay holes) and triangles whose vertices
//! span more than `max_depth_gap` meters (no bridging across depth cliffs).

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{project, CameraModel, DepthImage, PointCloud};

#[derive(Debug, Error)]
pub enum DensifyError {
    #[error("need at least 3 samples to triangulate, got {got}")]
    TooFewSamples { got: usize },
    #[error("sample ({row}, {col}) outside {height}x{width} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("depth must be positive and finite, got {0}")]
    NonPositiveDepth(f64),
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

/// Scattered depth samples on a pixel grid, at most one per pixel.
/// Duplicate pixels keep the nearest depth; samples are held sorted in
/// row-major order, so construction is independent of input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepth {
    height: usize,
    width: usize,
    samples: Vec<(usize, usize, f64)>,
}

impl SparseDepth {
    pub fn new(
        height: usize,
        width: usize,
        mut samples: Vec<(usize, usize, f64)>,
    ) -> Result<Self, DensifyError> {
        for &(row, col, z) in &samples {
            if row >= height || col >= width {
                return Err(DensifyError::OutOfBounds {
                    row,
                    col,
                    height,
                    width,
                });
            }
            if !(z > 0.0 && z.is_finite()) {
                return Err(DensifyError::NonPositiveDepth(z));
            }
        }
        samples.sort_by(|a, b| {
            (a.0, a.1)
                .cmp(&(b.0, b.1))
                .then(a.2.partial_cmp(&b.2).unwrap())
        });
        samples.dedup_by_key(|s| (s.0, s.1));
        Ok(Self {
            height,
            width,
            samples,
        })
    }

    /// Projects a cloud onto the grid, rounding to the nearest pixel and
    /// dropping points that fall outside or behind the camera.
    pub fn from_cloud(cam: &CameraModel, cloud: &PointCloud) -> Result<Self, DensifyError> {
        let mut samples = Vec::new();
        for p in &cloud.points {
            if p.z <= 0.0 {
                continue;
            }
            let q = project(cam, *p).expect("positive depth projects");
            let col = q.i.round();
            let row = q.j.round();
            if col < 0.0 || row < 0.0 || col >= cam.width as f64 || row >= cam.height as f64 {
                continue;
            }
            samples.push((row as usize, col as usize, p.z));
        }
        Self::new(cam.height, cam.width, samples)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn samples(&self) -> &[(usize, usize, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A mesh vertex: image-plane position plus depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshVertex {
    pub i: f64,
    pub j: f64,
    pub z: f64,
}

/// Triangles over image-plane vertices; no triangle is degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<MeshVertex>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<MeshVertex>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, DensifyError> {
        for tri in &triangles {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(DensifyError::InvalidMesh(format!(
                        "vertex index {v} out of range ({} vertices)",
                        vertices.len()
                    )));
                }
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            if orient2d(a.i, a.j, b.i, b.j, c.i, c.j) == 0.0 {
                return Err(DensifyError::InvalidMesh(format!(
                    "degenerate triangle {tri:?}"
                )));
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[MeshVertex] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
}

/// Twice the signed area of triangle `abc`; positive when counterclockwise
/// in (i, j) coordinates.
fn orient2d(ax: f64, ay: f64, bx: f64, by: f64, cx: f64, cy: f64) -> f64 {
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `abc`.
fn in_circle(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> f64 {
    let (ax, ay) = (a.0 - d.0, a.1 - d.1);
    let (bx, by) = (b.0 - d.0, b.1 - d.1);
    let (cx, cy) = (c.0 - d.0, c.1 - d.1);
    let asq = ax * ax + ay * ay;
    let bsq = bx * bx + by * by;
    let csq = cx * cx + cy * cy;
    ax * (by * csq - bsq * cy) - ay * (bx * csq - bsq * cx) + asq * (bx * cy - by * cx)
}

/// Delaunay triangulation of the samples with edge-length and depth-gap
/// rejection. The returned mesh may be empty when every triangle fails a
/// filter (or all samples are collinear).
pub fn triangulate(
    sd: &SparseDepth,
    max_edge: f64,
    max_depth_gap: f64,
) -> Result<TriangleMesh, DensifyError> {
    if !(max_edge > 0.0 && max_edge.is_finite()) {
        return Err(DensifyError::InvalidThreshold(max_edge));
    }
    if !(max_depth_gap > 0.0 && max_depth_gap.is_finite()) {
        return Err(DensifyError::InvalidThreshold(max_depth_gap));
    }
    let n = sd.samples.len();
    if n < 3 {
        return Err(DensifyError::TooFewSamples { got: n });
    }

    // Points in (i, j) = (col, row) order; super-triangle vertices are
    // appended after the samples and filtered out at the end.
    let mut pts: Vec<(f64, f64)> = sd
        .samples
        .iter()
        .map(|&(row, col, _)| (col as f64, row as f64))
        .collect();
    let span = (sd.width.max(sd.height) as f64).max(1.0);
    let (mx, my) = (sd.width as f64 / 2.0, sd.height as f64 / 2.0);
    pts.push((mx - 4.0 * span, my - 2.0 * span));
    pts.push((mx + 4.0 * span, my - 2.0 * span));
    pts.push((mx, my + 4.0 * span));

    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];
    let mut bad: Vec<usize> = Vec::new();
    let mut boundary: Vec<(usize, usize)> = Vec::new();
    for p in 0..n {
        bad.clear();
        for (t, tri) in tris.iter().enumerate() {
            let (a, b, c) = (pts[tri[0]], pts[tri[1]], pts[tri[2]]);
            let inside = if orient2d(a.0, a.1, b.0, b.1, c.0, c.1) > 0.0 {
                in_circle(a, b, c, pts[p])
            } else {
                in_circle(a, c, b, pts[p])
            };
            if inside > 0.0 {
                bad.push(t);
            }
        }
        // The cavity boundary: undirected edges used by exactly one bad
        // triangle.
        boundary.clear();
        for &t in &bad {
            let tri = tris[t];
            for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = (u.min(v), u.max(v));
                match boundary.iter().position(|&e| e == key) {
                    Some(pos) => {
                        boundary.swap_remove(pos);
                    }
                    None => boundary.push(key),
                }
            }
        }
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for &(u, v) in &boundary {
            tris.push([u, v, p]);
        }
    }

    let triangles = tris
        .into_iter()
        .filter(|tri| tri.iter().all(|&v| v < n))
        .filter(|tri| {
            let edges_ok = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
                .iter()
                .all(|&(u, v)| {
                    let (dx, dy) = (pts[u].0 - pts[v].0, pts[u].1 - pts[v].1);
                    let dz = (sd.samples[u].2 - sd.samples[v].2).abs();
                    (dx * dx + dy * dy).sqrt() <= max_edge && dz <= max_depth_gap
                });
            let (a, b, c) = (pts[tri[0]], pts[tri[1]], pts[tri[2]]);
            edges_ok && orient2d(a.0, a.1, b.0, b.1, c.0, c.1) != 0.0
        })
        .collect();

    let vertices = sd
        .samples
        .iter()
        .map(|&(row, col, z)| MeshVertex {
            i: col as f64,
            j: row as f64,
            z,
        })
        .collect();
    TriangleMesh::new(vertices, triangles)
}

/// Rasterizes interpolated depth onto a `width`x`height` grid. Pixels
/// covered by several triangles take the smallest interpolated depth (the
/// nearest surface wins); uncovered pixels stay invalid.
pub fn rasterize(mesh: &TriangleMesh, width: usize, height: usize) -> DepthImage {
    struct Tri {
        ax: f64,
        ay: f64,
        bx: f64,
        by: f64,
        cx: f64,
        cy: f64,
        za: f64,
        zb: f64,
        zc: f64,
        area: f64,
        c0: usize,
        c1: usize,
        r0: usize,
        r1: usize,
    }

    let mut tris = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|v| mesh.vertices[v]);
        let area = orient2d(a.i, a.j, b.i, b.j, c.i, c.j);
        let (min_x, max_x) = (a.i.min(b.i).min(c.i), a.i.max(b.i).max(c.i));
        let (min_y, max_y) = (a.j.min(b.j).min(c.j), a.j.max(b.j).max(c.j));
        if max_x < 0.0 || max_y < 0.0 || min_x > width as f64 - 1.0 || min_y > height as f64 - 1.0 {
            continue;
        }
        tris.push(Tri {
            ax: a.i,
            ay: a.j,
            bx: b.i,
            by: b.j,
            cx: c.i,
            cy: c.j,
            za: a.z,
            zb: b.z,
            zc: c.z,
            area,
            c0: min_x.ceil().max(0.0) as usize,
            c1: max_x.floor().min(width as f64 - 1.0) as usize,
            r0: min_y.ceil().max(0.0) as usize,
            r1: max_y.floor().min(height as f64 - 1.0) as usize,
        });
    }

    let mut depth = vec![f64::INFINITY; height * width];
    depth
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, out_row)| {
            let py = row as f64;
            for t in &tris {
                if row < t.r0 || row > t.r1 {
                    continue;
                }
                let s = t.area.signum();
                for (col, out) in out_row.iter_mut().enumerate().take(t.c1 + 1).skip(t.c0) {
                    let px = col as f64;
                    let w0 = orient2d(t.bx, t.by, t.cx, t.cy, px, py);
                    let w1 = orient2d(t.cx, t.cy, t.ax, t.ay, px, py);
                    let w2 = orient2d(t.ax, t.ay, t.bx, t.by, px, py);
                    if s * w0 >= 0.0 && s * w1 >= 0.0 && s * w2 >= 0.0 {
                        let z = (w0 * t.za + w1 * t.zb + w2 * t.zc) / t.area;
                        if z < *out {
                            *out = z;
                        }
                    }
                }
            }
        });

    DepthImage::from_data(height, width, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_points_make_one_triangle() {
        let sd = SparseDepth::new(10, 10, vec![(0, 0, 1.0), (0, 5, 1.0), (5, 0, 1.0)]).unwrap();
        let mesh = triangulate(&sd, 20.0, 1.0).unwrap();
        assert_eq!(mesh.triangles().len(), 1);
    }

    #[test]
    fn square_makes_two_triangles_sharing_a_diagonal() {
        let sd = SparseDepth::new(
            10,
            10,
            vec![(1, 1, 2.0), (1, 6, 2.0), (6, 1, 2.0), (6, 6, 2.0)],
        )
        .unwrap();
        let mesh = triangulate(&sd, 20.0, 1.0).unwrap();
        assert_eq!(mesh.triangles().len(), 2);
        let [t0, t1] = [mesh.triangles()[0], mesh.triangles()[1]];
        let shared = t0.iter().filter(|v| t1.contains(v)).count();
        assert_eq!(shared, 2);
    }

    #[test]
    fn depth_cliff_is_never_bridged() {
        // Left half at 1 m, right half at 5 m, one pixel apart; the 4 m gap
        // exceeds the 1 m threshold so no triangle may span both planes.
        let mut samples = Vec::new();
        for row in (0..20).step_by(2) {
            for col in (0..20).step_by(2) {
                samples.push((row, col, if col < 10 { 1.0 } else { 5.0 }));
            }
        }
        let sd = SparseDepth::new(20, 20, samples).unwrap();
        let mesh = triangulate(&sd, 20.0, 1.0).unwrap();
        assert!(!mesh.triangles().is_empty());
        for tri in mesh.triangles() {
            let zs: Vec<f64> = tri.iter().map(|&v| mesh.vertices()[v].z).collect();
            let same_plane = zs.iter().all(|&z| z == 1.0) || zs.iter().all(|&z| z == 5.0);
            assert!(same_plane, "triangle {tri:?} bridges the cliff");
        }
        // The rasterized gap column between the planes stays invalid.
        let depth = rasterize(&mesh, 20, 20);
        for row in 0..19 {
            assert!(!depth.is_valid(row, 9));
        }
    }

    #[test]
    fn constant_triangle_rasterizes_constant() {
        let mesh = TriangleMesh::new(
            vec![
                MeshVertex {
                    i: 0.0,
                    j: 0.0,
                    z: 3.0,
                },
                MeshVertex {
                    i: 8.0,
                    j: 0.0,
                    z: 3.0,
                },
                MeshVertex {
                    i: 0.0,
                    j: 8.0,
                    z: 3.0,
                },
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let depth = rasterize(&mesh, 10, 10);
        assert!((depth.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((depth.get(3, 3) - 3.0).abs() < 1e-12);
        assert!(!depth.is_valid(9, 9));
        assert!(!depth.is_valid(0, 9));
    }

    #[test]
    fn planar_ramp_interpolates_exactly() {
        // Samples on every 4th pixel of the plane z = 1 + 0.01*col; interior
        // interpolation must reproduce the plane.
        let (h, w) = (24usize, 32usize);
        let mut samples = Vec::new();
        for row in (0..h).step_by(4) {
            for col in (0..w).step_by(4) {
                samples.push((row, col, 1.0 + 0.01 * col as f64));
            }
        }
        let sd = SparseDepth::new(h, w, samples).unwrap();
        let mesh = triangulate(&sd, 20.0, 1.0).unwrap();
        let depth = rasterize(&mesh, w, h);
        for row in 0..=20 {
            for col in 0..=28 {
                let expected = 1.0 + 0.01 * col as f64;
                assert!(depth.is_valid(row, col), "pixel ({row},{col}) not covered");
                assert!(
                    (depth.get(row, col) - expected).abs() < 1e-3,
                    "pixel ({row},{col}): {} vs {expected}",
                    depth.get(row, col)
                );
            }
        }
    }

    #[test]
    fn nearest_depth_wins_on_overlap() {
        let mesh = TriangleMesh::new(
            vec![
                MeshVertex {
                    i: 0.0,
                    j: 0.0,
                    z: 2.0,
                },
                MeshVertex {
                    i: 9.0,
                    j: 0.0,
                    z: 2.0,
                },
                MeshVertex {
                    i: 0.0,
                    j: 9.0,
                    z: 2.0,
                },
                MeshVertex {
                    i: 1.0,
                    j: 1.0,
                    z: 1.0,
                },
                MeshVertex {
                    i: 5.0,
                    j: 1.0,
                    z: 1.0,
                },
                MeshVertex {
                    i: 1.0,
                    j: 5.0,
                    z: 1.0,
                },
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let depth = rasterize(&mesh, 10, 10);
        assert!((depth.get(2, 2) - 1.0).abs() < 1e-12);
        assert!((depth.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_pixels_keep_nearest_depth() {
        let sd = SparseDepth::new(4, 4, vec![(1, 1, 5.0), (1, 1, 2.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(sd.samples(), &[(1, 1, 2.0)]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(matches!(
            SparseDepth::new(4, 4, vec![(4, 0, 1.0)]),
            Err(DensifyError::OutOfBounds { .. })
        ));
        assert!(matches!(
            SparseDepth::new(4, 4, vec![(0, 0, -1.0)]),
            Err(DensifyError::NonPositiveDepth(_))
        ));
        let sd = SparseDepth::new(4, 4, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            triangulate(&sd, 20.0, 1.0),
            Err(DensifyError::TooFewSamples { got: 2 })
        ));
        let sd3 = SparseDepth::new(4, 4, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        assert!(triangulate(&sd3, 0.0, 1.0).is_err());
    }

    #[test]
    fn collinear_samples_yield_empty_mesh() {
        let sd = SparseDepth::new(8, 8, vec![(2, 0, 1.0), (2, 3, 1.0), (2, 6, 1.0)]).unwrap();
        let mesh = triangulate(&sd, 20.0, 1.0).unwrap();
        assert!(mesh.triangles().is_empty());
        let depth = rasterize(&mesh, 8, 8);
        assert_eq!(depth.valid_count(), 0);
    }

    #[test]
    fn mesh_constructor_rejects_degenerate_triangles() {
        let verts = vec![
            MeshVertex {
                i: 0.0,
                j: 0.0,
                z: 1.0,
            },
            MeshVertex {
                i: 1.0,
                j: 1.0,
                z: 1.0,
            },
            MeshVertex {
                i: 2.0,
                j: 2.0,
                z: 1.0,
            },
        ];
        assert!(TriangleMesh::new(verts.clone(), vec![[0, 1, 2]]).is_err());
        assert!(TriangleMesh::new(verts, vec![[0, 1, 9]]).is_err());
    }

    #[test]
    fn adding_samples_never_invalidates_pixels() {
        // Smooth surface, thresholds far above the sample spacing: any
        // refinement keeps every previously covered pixel covered.
        let (h, w) = (20usize, 20usize);
        let plane = |row: usize, col: usize| 2.0 + 0.01 * row as f64 + 0.005 * col as f64;
        let mut base = Vec::new();
        for row in (0..h).step_by(5) {
            for col in (0..w).step_by(5) {
                base.push((row, col, plane(row, col)));
            }
        }
        let sd_base = SparseDepth::new(h, w, base.clone()).unwrap();
        let before = rasterize(&triangulate(&sd_base, 20.0, 1.0).unwrap(), w, h);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut extended = base;
        for _ in 0..30 {
            let row = rng.random_range(0..h);
            let col = rng.random_range(0..w);
            extended.push((row, col, plane(row, col)));
        }
        let sd_ext = SparseDepth::new(h, w, extended).unwrap();
        let after = rasterize(&triangulate(&sd_ext, 20.0, 1.0).unwrap(), w, h);

        for row in 0..h {
            for col in 0..w {
                if before.is_valid(row, col) {
                    assert!(
                        after.is_valid(row, col),
                        "pixel ({row},{col}) lost coverage"
                    );
                }
            }
        }
    }
}
