//! Synthetic RGBD scenes: textured fronto-parallel rectangles in front of
//! an optional backdrop plane, rendered with nearest-surface occlusion.
//!
//! Textures are functions of physical surface coordinates, so the same
//! object at two depths shows the same pattern at two image scales. That
//! property is what the scale-invariance and mechanism tests exercise, and
//! it is why specs store sizes in meters, never pixels.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{CameraModel, DepthImage, GeomError};
use crate::raster::{LabelMap, PlanarImage, IGNORE_LABEL};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Surface color as a function of local physical coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Texture {
    Solid {
        color: [f32; 3],
    },
    StripesX {
        period_m: f64,
        colors: [[f32; 3]; 2],
    },
    Checker {
        period_m: f64,
        colors: [[f32; 3]; 2],
    },
    SinusoidXY {
        period_m: f64,
    },
}

impl Texture {
    fn sample(&self, u: f64, v: f64) -> [f32; 3] {
        match self {
            Texture::Solid { color } => *color,
            Texture::StripesX { period_m, colors } => {
                colors[(u.div_euclid(*period_m) as i64).rem_euclid(2) as usize]
            }
            Texture::Checker { period_m, colors } => {
                let parity = u.div_euclid(*period_m) as i64 + v.div_euclid(*period_m) as i64;
                colors[parity.rem_euclid(2) as usize]
            }
            Texture::SinusoidXY { period_m } => {
                let w = std::f64::consts::TAU / period_m;
                let g = (0.5 + 0.25 * (w * u).sin() + 0.25 * (w * v).cos()) as f32;
                [g, g, g]
            }
        }
    }

    fn period(&self) -> Option<f64> {
        match self {
            Texture::Solid { .. } => None,
            Texture::StripesX { period_m, .. }
            | Texture::Checker { period_m, .. }
            | Texture::SinusoidXY { period_m } => Some(*period_m),
        }
    }
}

/// A fronto-parallel rectangle: `width_m` x `height_m` meters, centered at
/// (`center_x`, `center_y`, `depth`) in camera coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: u8,
    pub center_x: f64,
    pub center_y: f64,
    pub depth: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub texture: Texture,
}

/// An unbounded plane behind every object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backdrop {
    pub class: u8,
    pub depth: f64,
    pub texture: Texture,
}

/// Full scene description; the camera's pixel dimensions set the render
/// size. Serializes to JSON for the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub camera: CameraModel,
    pub backdrop: Option<Backdrop>,
    pub objects: Vec<SceneObject>,
}

/// One rendered scene. Pixels no surface covers have zero depth, the
/// ignore label, and black color.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: PlanarImage,
    pub depth: DepthImage,
    pub labels: LabelMap,
}

fn validate(spec: &SceneSpec) -> Result<(), SynthError> {
    let c = &spec.camera;
    CameraModel::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height)?;
    let check_texture = |t: &Texture, what: &str| {
        if t.period().is_some_and(|p| !(p > 0.0) || !p.is_finite()) {
            return Err(SynthError::InvalidScene(format!(
                "{what} has a non-positive texture period"
            )));
        }
        Ok(())
    };
    if let Some(b) = &spec.backdrop {
        if !(b.depth > 0.0) || !b.depth.is_finite() {
            return Err(SynthError::InvalidScene(format!(
                "backdrop depth {}",
                b.depth
            )));
        }
        if b.class == IGNORE_LABEL {
            return Err(SynthError::InvalidScene(
                "backdrop uses the ignore label".into(),
            ));
        }
        check_texture(&b.texture, "backdrop")?;
    }
    for (idx, o) in spec.objects.iter().enumerate() {
        if !(o.depth > 0.0) || !o.depth.is_finite() {
            return Err(SynthError::InvalidScene(format!(
                "object {idx} depth {}",
                o.depth
            )));
        }
        if !(o.width_m > 0.0) || !(o.height_m > 0.0) {
            return Err(SynthError::InvalidScene(format!(
                "object {idx} size {}x{}",
                o.width_m, o.height_m
            )));
        }
        if o.class == IGNORE_LABEL {
            return Err(SynthError::InvalidScene(format!(
                "object {idx} uses the ignore label"
            )));
        }
        check_texture(&o.texture, &format!("object {idx}"))?;
    }
    Ok(())
}

pub fn render(spec: &SceneSpec) -> Result<Rendered, SynthError> {
    validate(spec)?;
    let cam = &spec.camera;
    let (h, w) = (cam.height, cam.width);
    let mut image = PlanarImage::zeros(3, h, w);
    let mut depth = DepthImage::invalid(h, w);
    let mut labels = LabelMap::ignored(h, w);
    for r in 0..h {
        let dir_y = (r as f64 - cam.cy) / cam.fy;
        for c in 0..w {
            let dir_x = (c as f64 - cam.cx) / cam.fx;
            let mut hit: Option<(f64, u8, [f32; 3])> = spec.backdrop.as_ref().map(|b| {
                (
                    b.depth,
                    b.class,
                    b.texture.sample(dir_x * b.depth, dir_y * b.depth),
                )
            });
            for o in &spec.objects {
                let (u, v) = (dir_x * o.depth - o.center_x, dir_y * o.depth - o.center_y);
                let covered = u.abs() <= o.width_m / 2.0 && v.abs() <= o.height_m / 2.0;
                if covered && hit.is_none_or(|(z, _, _)| o.depth < z) {
                    hit = Some((o.depth, o.class, o.texture.sample(u, v)));
                }
            }
            if let Some((z, class, color)) = hit {
                depth.set(r, c, z);
                labels.set(r, c, class);
                for (ch, value) in color.into_iter().enumerate() {
                    image.set(ch, r, c, value);
                }
            }
        }
    }
    Ok(Rendered {
        image,
        depth,
        labels,
    })
}

/// Renders, then perturbs each color channel with Gaussian noise of the
/// given sigma (clamped back to [0, 1]). Depth and labels stay clean.
pub fn render_with_noise(spec: &SceneSpec, sigma: f64, seed: u64) -> Result<Rendered, SynthError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(SynthError::InvalidScene(format!("noise sigma {sigma}")));
    }
    let mut rendered = render(spec)?;
    if sigma == 0.0 {
        return Ok(rendered);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in rendered.image.data_mut() {
        *v = (*v + (sigma * standard_normal(&mut rng)) as f32).clamp(0.0, 1.0);
    }
    Ok(rendered)
}

/// Box-Muller from two uniforms; good enough for test noise and free of
/// extra dependencies.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Two fronto-parallel planes: the left half at 1 m (class 1), the rest a
/// backdrop at 2 m (class 0).
pub fn two_plane_scene() -> SceneSpec {
    let camera = CameraModel::new(32.0, 32.0, 15.5, 15.5, 32, 32).expect("static intrinsics");
    SceneSpec {
        camera,
        backdrop: Some(Backdrop {
            class: 0,
            depth: 2.0,
            texture: Texture::Solid {
                color: [0.3, 0.3, 0.35],
            },
        }),
        objects: vec![SceneObject {
            class: 1,
            center_x: -0.25,
            center_y: 0.0,
            depth: 1.0,
            width_m: 0.5,
            height_m: 2.0,
            texture: Texture::Solid {
                color: [0.8, 0.7, 0.2],
            },
        }],
    }
}

/// A smoothly textured 1 m square at the given depth against a far
/// backdrop. The half-integer principal point aligns pixel centers across
/// depths that differ by a factor of two.
pub fn textured_square_scene(depth: f64) -> SceneSpec {
    let camera = CameraModel::new(32.0, 32.0, 31.5, 31.5, 64, 64).expect("static intrinsics");
    SceneSpec {
        camera,
        backdrop: Some(Backdrop {
            class: 0,
            depth: 9.0,
            texture: Texture::Solid {
                color: [0.1, 0.1, 0.1],
            },
        }),
        objects: vec![SceneObject {
            class: 1,
            center_x: 0.0,
            center_y: 0.0,
            depth,
            width_m: 1.0,
            height_m: 1.0,
            texture: Texture::SinusoidXY { period_m: 1.0 },
        }],
    }
}

/// Stripe periods that tell the two foreground classes apart. The colors
/// match on purpose: only the physical stripe frequency carries class
/// identity, so appearance at a single image scale is ambiguous across
/// depths while depth-normalized appearance is not.
pub const CLASS_PERIODS: [f64; 2] = [0.3, 0.6];

/// A random scene with striped squares spread over depths 1 to 8 m; the
/// backdrop sits near 9 m. Class 0 is the backdrop, classes 1 and 2 are
/// told apart only by stripe period.
pub fn depth_spread_scene(rng: &mut impl Rng) -> SceneSpec {
    let camera = CameraModel::new(64.0, 64.0, 31.5, 31.5, 64, 64).expect("static intrinsics");
    let stripe_colors = [[0.9, 0.8, 0.2], [0.15, 0.25, 0.6]];
    let objects = (0..rng.random_range(2..=4))
        .map(|_| {
            let class = rng.random_range(1..=2u8);
            let depth: f64 = rng.random_range(1.0..8.0);
            let max_size = (0.65 * depth).min(1.4);
            let size: f64 = rng.random_range(0.5..max_size.max(0.51));
            let fov_half = depth * 31.5 / 64.0;
            let max_off = (fov_half - size / 2.0).max(0.0);
            SceneObject {
                class,
                center_x: rng.random_range(-max_off..=max_off),
                center_y: rng.random_range(-max_off..=max_off),
                depth,
                width_m: size,
                height_m: size,
                texture: Texture::StripesX {
                    period_m: CLASS_PERIODS[(class - 1) as usize],
                    colors: stripe_colors,
                },
            }
        })
        .collect();
    SceneSpec {
        camera,
        backdrop: Some(Backdrop {
            class: 0,
            depth: rng.random_range(8.6..9.4),
            texture: Texture::Solid {
                color: [0.08, 0.08, 0.08],
            },
        }),
        objects,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_square_covers_the_expected_pixels() {
        let spec = textured_square_scene(2.0);
        let out = render(&spec).unwrap();
        // Half-width in pixels: fx * 0.5 / z = 8, around cx = 31.5.
        let mut covered_cols = Vec::new();
        for c in 0..64 {
            if out.labels.get(32, c) == 1 {
                covered_cols.push(c);
            }
        }
        assert_eq!(covered_cols, (24..=39).collect::<Vec<_>>());
        assert_eq!(out.depth.get(32, 32), 2.0);
        assert_eq!(out.depth.get(0, 0), 9.0);
        assert_eq!(out.labels.get(0, 0), 0);
    }

    #[test]
    fn nearest_surface_wins_occlusion() {
        let mut spec = textured_square_scene(4.0);
        spec.objects.push(SceneObject {
            class: 2,
            center_x: 0.0,
            center_y: 0.0,
            depth: 2.0,
            width_m: 0.25,
            height_m: 0.25,
            texture: Texture::Solid {
                color: [1.0, 0.0, 0.0],
            },
        });
        let out = render(&spec).unwrap();
        assert_eq!(out.labels.get(32, 32), 2);
        assert_eq!(out.depth.get(32, 32), 2.0);
        // Outside the small rectangle the far square still shows.
        assert_eq!(out.labels.get(32, 28), 1);
        assert_eq!(out.depth.get(32, 28), 4.0);
    }

    #[test]
    fn no_backdrop_leaves_uncovered_pixels_invalid() {
        let mut spec = textured_square_scene(2.0);
        spec.backdrop = None;
        let out = render(&spec).unwrap();
        assert_eq!(out.labels.get(0, 0), IGNORE_LABEL);
        assert!(!out.depth.is_valid(0, 0));
        assert_eq!(out.image.get(0, 0, 0), 0.0);
    }

    #[test]
    fn stripe_count_is_depth_invariant() {
        // The pattern lives in surface coordinates: a 1 m object spans four
        // 0.25 m stripes at any depth, while the stripes' pixel width
        // halves from z=2 to z=4.
        let stripes = |z: f64| {
            let mut spec = textured_square_scene(z);
            spec.objects[0].texture = Texture::StripesX {
                period_m: 0.25,
                colors: [[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]],
            };
            let out = render(&spec).unwrap();
            let row: Vec<f32> = (0..64)
                .filter(|&c| out.labels.get(32, c) == 1)
                .map(|c| out.image.get(0, 32, c))
                .collect();
            (row.windows(2).filter(|w| w[0] != w[1]).count(), row.len())
        };
        let (near_edges, near_span) = stripes(2.0);
        let (far_edges, far_span) = stripes(4.0);
        assert_eq!(near_edges, far_edges);
        assert_eq!(near_span, 2 * far_span);
    }

    #[test]
    fn noise_is_seeded_and_leaves_geometry_clean() {
        let spec = two_plane_scene();
        let clean = render(&spec).unwrap();
        let a = render_with_noise(&spec, 0.05, 7).unwrap();
        let b = render_with_noise(&spec, 0.05, 7).unwrap();
        let c = render_with_noise(&spec, 0.05, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.image, c.image);
        assert_eq!(a.depth, clean.depth);
        assert_eq!(a.labels, clean.labels);
        assert_ne!(a.image, clean.image);
        assert_eq!(render_with_noise(&spec, 0.0, 7).unwrap(), clean);
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = depth_spread_scene(&mut ChaCha8Rng::seed_from_u64(3));
        let json = serde_json::to_string(&spec).unwrap();
        let back: SceneSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn depth_spread_scenes_stay_in_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let spec = depth_spread_scene(&mut rng);
            assert!(spec.backdrop.as_ref().unwrap().depth > 8.0);
            for o in &spec.objects {
                assert!(o.depth >= 1.0 && o.depth <= 8.0);
                assert!(o.class == 1 || o.class == 2);
                let expect = CLASS_PERIODS[(o.class - 1) as usize];
                assert_eq!(o.texture.period(), Some(expect));
            }
            render(&spec).unwrap();
        }
    }

    #[test]
    fn invalid_scenes_are_rejected() {
        let mut spec = two_plane_scene();
        spec.objects[0].depth = 0.0;
        assert!(matches!(render(&spec), Err(SynthError::InvalidScene(_))));
        let mut spec = two_plane_scene();
        spec.objects[0].width_m = -1.0;
        assert!(matches!(render(&spec), Err(SynthError::InvalidScene(_))));
        let mut spec = two_plane_scene();
        spec.camera.fx = 0.0;
        assert!(matches!(render(&spec), Err(SynthError::Geom(_))));
        assert!(matches!(
            render_with_noise(&two_plane_scene(), f64::NAN, 0),
            Err(SynthError::InvalidScene(_))
        ));
    }
}
