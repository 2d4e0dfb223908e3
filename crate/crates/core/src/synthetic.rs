//! Analytic synthetic scenes with ray-traced colour, depth and normal priors.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::camera::PinholeCamera;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::text::{Observation, Split, Track};
use crate::scene::{GroundTruth, SceneBundle, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    CubeRoom,
    TexturedPlane,
    TwoBox,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::CubeRoom, SceneKind::TexturedPlane, SceneKind::TwoBox];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::CubeRoom => "cube-room",
            SceneKind::TexturedPlane => "textured-plane",
            SceneKind::TwoBox => "two-box",
        }
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOptions {
    pub image_size: usize,
    pub views: usize,
    /// Every `test_every`-th view is held out.
    pub test_every: usize,
    pub points: usize,
    /// Gaussian position noise as a fraction of the scene diagonal.
    pub point_noise: f64,
    pub outlier_fraction: f64,
    /// Depth priors are stored as `(D - shift) / scale`.
    pub depth_scale: f64,
    pub depth_shift: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self { image_size: 64, views: 16, test_every: 4, points: 200, point_noise: 0.0, outlier_fraction: 0.0, depth_scale: 1.0, depth_shift: 0.0 }
    }
}

/// Triangle mesh with one material index per face.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub materials: Vec<u8>,
}

impl Mesh {
    fn push_quad(&mut self, corners: [Vec3; 4], material: u8) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&corners);
        self.faces.push([base, base + 1, base + 2]);
        self.faces.push([base, base + 2, base + 3]);
        self.materials.extend([material, material]);
    }

    /// Axis-aligned box; faces point outward, or inward for a room.
    pub fn push_box(&mut self, lo: Vec3, hi: Vec3, inward: bool, material: u8) {
        let c = |x: usize, y: usize, z: usize| Vec3::new([lo.x, hi.x][x], [lo.y, hi.y][y], [lo.z, hi.z][z]);
        let quads = [
            [c(0, 0, 0), c(0, 1, 0), c(1, 1, 0), c(1, 0, 0)],
            [c(0, 0, 1), c(1, 0, 1), c(1, 1, 1), c(0, 1, 1)],
            [c(0, 0, 0), c(1, 0, 0), c(1, 0, 1), c(0, 0, 1)],
            [c(0, 1, 0), c(0, 1, 1), c(1, 1, 1), c(1, 1, 0)],
            [c(0, 0, 0), c(0, 0, 1), c(0, 1, 1), c(0, 1, 0)],
            [c(1, 0, 0), c(1, 1, 0), c(1, 1, 1), c(1, 0, 1)],
        ];
        for (f, mut q) in quads.into_iter().enumerate() {
            if inward {
                q.reverse();
            }
            self.push_quad(q, material + f as u8);
        }
    }

    pub fn face(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.vertices[i as usize])
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face(f);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn area(&self, f: usize) -> f64 {
        let [a, b, c] = self.face(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Nearest hit `(distance, face)` along a unit direction.
    pub fn trace(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for f in 0..self.faces.len() {
            let [a, b, c] = self.face(f);
            let (e1, e2) = (b - a, c - a);
            let p = dir.cross(&e2);
            let det = e1.dot(&p);
            if det.abs() < 1e-14 {
                continue;
            }
            let inv = 1.0 / det;
            let s = origin - a;
            let u = s.dot(&p) * inv;
            if !(-1e-12..=1.0 + 1e-12).contains(&u) {
                continue;
            }
            let q = s.cross(&e1);
            let v = dir.dot(&q) * inv;
            if v < -1e-12 || u + v > 1.0 + 1e-12 {
                continue;
            }
            let t = e2.dot(&q) * inv;
            if t > 1e-9 && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, f));
            }
        }
        best
    }

    /// Area-weighted uniform surface samples with their face indices.
    pub fn sample_surface(&self, rng: &mut impl Rng, n: usize) -> Vec<(Vec3, usize)> {
        let cdf: Vec<f64> = (0..self.faces.len())
            .scan(0.0, |acc, f| {
                *acc += self.area(f);
                Some(*acc)
            })
            .collect();
        let total = *cdf.last().unwrap_or(&0.0);
        (0..n)
            .map(|_| {
                let r = rng.random::<f64>() * total;
                let f = cdf.partition_point(|c| *c < r).min(self.faces.len() - 1);
                let [a, b, c] = self.face(f);
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                let s = r1.sqrt();
                (a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2), f)
            })
            .collect()
    }
}

fn checker(p: &Vec3, cell: f64) -> bool {
    let k = (p.x / cell).floor() + (p.y / cell).floor() + (p.z / cell).floor();
    k.rem_euclid(2.0) == 0.0
}

fn palette(material: u8) -> Vec3 {
    const P: [[f64; 3]; 8] = [[0.85, 0.35, 0.3], [0.3, 0.7, 0.4], [0.3, 0.45, 0.85], [0.85, 0.75, 0.3], [0.7, 0.35, 0.75], [0.35, 0.75, 0.8], [0.6, 0.6, 0.6], [0.9, 0.55, 0.2]];
    Vec3::from(P[material as usize % P.len()])
}

fn texture(kind: SceneKind, material: u8, p: &Vec3) -> Vec3 {
    let base = palette(material);
    match kind {
        SceneKind::CubeRoom => base * (0.75 + 0.25 * (4.0 * p.x).sin() * (4.0 * p.y).sin() * (4.0 * p.z).cos()),
        SceneKind::TexturedPlane => {
            let c = if checker(p, 0.25) { Vec3::new(0.9, 0.85, 0.7) } else { Vec3::new(0.2, 0.3, 0.55) };
            c * (0.8 + 0.2 * (18.0 * p.x + 7.0 * p.y).sin())
        }
        SceneKind::TwoBox => {
            if material == 0 {
                if checker(p, 0.5) {
                    Vec3::repeat(0.8)
                } else {
                    Vec3::repeat(0.35)
                }
            } else {
                base * (0.7 + 0.3 * p.z.clamp(0.0, 1.0))
            }
        }
    }
}

pub fn scene_mesh(kind: SceneKind) -> Mesh {
    let mut m = Mesh { vertices: Vec::new(), faces: Vec::new(), materials: Vec::new() };
    match kind {
        SceneKind::CubeRoom => m.push_box(Vec3::repeat(-1.0), Vec3::repeat(1.0), true, 0),
        SceneKind::TexturedPlane => {
            let s = 4.0;
            m.push_quad([Vec3::new(-s, -s, 0.0), Vec3::new(s, -s, 0.0), Vec3::new(s, s, 0.0), Vec3::new(-s, s, 0.0)], 0);
        }
        SceneKind::TwoBox => {
            let s = 2.5;
            m.push_quad([Vec3::new(-s, -s, 0.0), Vec3::new(s, -s, 0.0), Vec3::new(s, s, 0.0), Vec3::new(-s, s, 0.0)], 0);
            m.push_box(Vec3::new(-1.0, -0.6, 0.0), Vec3::new(-0.2, 0.2, 0.8), false, 1);
            m.push_box(Vec3::new(0.3, -0.2, 0.0), Vec3::new(1.0, 0.7, 0.5), false, 2);
        }
    }
    m
}

pub fn camera_ring(kind: SceneKind, views: usize, size: usize) -> Vec<PinholeCamera> {
    let up = Vec3::z();
    (0..views)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / views as f64;
            let (c, s) = (a.cos(), a.sin());
            let (center, target, fov) = match kind {
                SceneKind::CubeRoom => {
                    let h = if i % 2 == 0 { 0.15 } else { -0.15 };
                    (Vec3::new(0.4 * c, 0.4 * s, h), Vec3::new(c, s, -2.0 * h), 80f64)
                }
                SceneKind::TexturedPlane => (Vec3::new(1.0 * c, 1.0 * s, 2.0), Vec3::zeros(), 50.0),
                SceneKind::TwoBox => (Vec3::new(3.0 * c, 3.0 * s, 1.8), Vec3::new(0.0, 0.0, 0.3), 55.0),
            };
            let focal = 0.5 * size as f64 / (0.5 * fov.to_radians()).tan();
            PinholeCamera::look_at(i as u32, size, size, focal, center, target, up)
        })
        .collect()
}

/// Ray-traced colour, ray depth and camera-facing normal per pixel; misses
/// give black, depth 0 and a zero normal.
pub fn trace_view(kind: SceneKind, mesh: &Mesh, camera: &PinholeCamera) -> View {
    let c = camera.center();
    let px: Vec<(Vec3, f64, Vec3)> = (0..camera.pixel_count())
        .into_par_iter()
        .map(|i| {
            let d = camera.ray_direction(i % camera.width, i / camera.width);
            match mesh.trace(&c, &d) {
                Some((t, f)) => {
                    let mut n = mesh.face_normal(f);
                    if n.dot(&d) > 0.0 {
                        n = -n;
                    }
                    (texture(kind, mesh.materials[f], &(c + d * t)), t, n)
                }
                None => (Vec3::zeros(), 0.0, Vec3::zeros()),
            }
        })
        .collect();
    View { color: px.iter().map(|p| p.0).collect(), depth: px.iter().map(|p| p.1).collect(), normal: px.iter().map(|p| p.2).collect() }
}

pub fn gen_synthetic(kind: SceneKind, seed: u64, opts: &SyntheticOptions) -> SceneBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = scene_mesh(kind);
    let cameras = camera_ring(kind, opts.views, opts.image_size);
    let traced: Vec<View> = cameras.iter().map(|cam| trace_view(kind, &mesh, cam)).collect();
    let views = traced
        .into_iter()
        .map(|mut v| {
            for d in v.depth.iter_mut().filter(|d| **d > 0.0) {
                *d = (*d - opts.depth_shift) / opts.depth_scale;
            }
            v
        })
        .collect();

    let (lo, hi) = mesh.bbox();
    let diag = (hi - lo).norm();
    let noise = Normal::new(0.0, (opts.point_noise * diag).max(0.0)).unwrap();
    let mut points = Vec::new();
    let mut tracks = Vec::new();
    let mut attempts = 0;
    while points.len() < opts.points && attempts < opts.points * 50 {
        attempts += 1;
        let (surface, _) = mesh.sample_surface(&mut rng, 1)[0];
        let outlier = rng.random::<f64>() < opts.outlier_fraction;
        let p = if outlier {
            Vec3::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y), rng.random_range(lo.z..=hi.z))
        } else {
            surface + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
        };
        // observed where the true surface point is unoccluded and in frame
        let observations: Vec<Observation> = cameras
            .iter()
            .filter_map(|cam| {
                let proj = cam.project(&surface, 1e-6, 0.0);
                let [x, y] = proj.screen;
                if !proj.visible || x < 0.0 || y < 0.0 || x >= cam.width as f64 || y >= cam.height as f64 {
                    return None;
                }
                let to = surface - cam.center();
                let dist = to.norm();
                let hit = mesh.trace(&cam.center(), &(to / dist))?;
                if (hit.0 - dist).abs() > 1e-6 * diag.max(1.0) {
                    return None;
                }
                let seen = if outlier { cam.project(&p, 1e-6, 0.0).screen } else { [x, y] };
                Some(Observation { camera: cam.id, pixel: seen })
            })
            .collect();
        if observations.is_empty() {
            continue;
        }
        tracks.push(Track { point: points.len(), observations });
        points.push(p);
    }

    let mut split = Split::default();
    for cam in &cameras {
        if opts.test_every > 0 && cam.id as usize % opts.test_every == opts.test_every - 1 {
            split.test.push(cam.id);
        } else {
            split.train.push(cam.id);
        }
    }
    let bundle = SceneBundle {
        kind: kind.name().to_string(),
        cameras,
        views,
        points,
        tracks,
        split,
        ground_truth: Some(GroundTruth { vertices: mesh.vertices.clone(), faces: mesh.faces.clone() }),
    };
    bundle.quantized()
}
