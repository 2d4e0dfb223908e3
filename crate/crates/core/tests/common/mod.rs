#![allow(dead_code)]

pub mod gradients;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trisplat::geometry::TrianglePrimitive;
use trisplat::render::{RenderGrads, RenderSettings, RenderTarget};
use trisplat::{PinholeCamera, TriangleSoup, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Camera at the origin looking down +z with the principal point at the
/// image center.
pub fn axis_camera(size: usize, focal: f64) -> PinholeCamera {
    PinholeCamera::look_at(0, size, size, focal, Vec3::zeros(), Vec3::z(), -Vec3::y())
}

/// Small random triangles in front of an axis camera, each in its own depth
/// slab so the sort order is stable under small perturbations.
pub fn random_scene(rng: &mut impl Rng, count: usize, sharpness: f64, smoothness: f64) -> TriangleSoup {
    let mut soup = TriangleSoup::new();
    for k in 0..count {
        let z = 2.0 + 0.15 * k as f64 + rng.random_range(0.0..0.03);
        let center = Vec3::new(rng.random_range(-0.5..0.5) * z / 2.0, rng.random_range(-0.5..0.5) * z / 2.0, z);
        let tilt = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), 1.0).normalize();
        let n = if rng.random_bool(0.5) { tilt } else { -tilt };
        let t = n.cross(&unit_vector(rng)).normalize();
        let s = n.cross(&t);
        let r = rng.random_range(0.15..0.35);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let verts = [0.0, 1.0, 2.0].map(|i: f64| {
            let a = phase + i * 2.1 + rng.random_range(-0.3..0.3);
            center + (t * a.cos() + s * a.sin()) * r
        });
        let alpha = rng.random_range(0.3..0.8);
        soup.push(TrianglePrimitive::new(0, verts, alpha, sharpness * rng.random_range(0.8..1.2), smoothness * rng.random_range(0.8..1.2)));
    }
    soup
}

/// Single-tile settings with no early termination, so every term is smooth.
pub fn smooth_settings(size: usize) -> RenderSettings {
    RenderSettings { tile_size: size, transmittance_cutoff: 0.0, ..RenderSettings::default() }
}

pub fn random_upstream(rng: &mut impl Rng, n: usize) -> RenderGrads {
    RenderGrads {
        depth: Some((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()),
        normal: Some((0..n).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()),
        alpha: Some((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()),
    }
}

/// `sum(g . map)` over the rendered maps.
pub fn linear_objective(out: &RenderTarget, g: &RenderGrads) -> f64 {
    let mut total = 0.0;
    if let Some(gd) = &g.depth {
        total += gd.iter().zip(&out.depth).map(|(a, b)| a * b).sum::<f64>();
    }
    if let Some(gn) = &g.normal {
        total += gn.iter().zip(&out.normal).map(|(a, b)| a.dot(b)).sum::<f64>();
    }
    if let Some(ga) = &g.alpha {
        total += ga.iter().zip(&out.alpha).map(|(a, b)| a * b).sum::<f64>();
    }
    total
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Attaches `k` randomized surfels to every triangle.
pub fn with_random_appearance(rng: &mut impl Rng, soup: &mut TriangleSoup, k: usize) {
    for t in &mut soup.triangles {
        let mut att = trisplat::appearance::AppearanceAttachment::initialize(t, k).unwrap();
        att.scaling = att.scaling.map(|l| l * rng.random_range(0.5..1.5));
        for o in &mut att.offsets {
            o.offset += Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
            o.color = Vec3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            o.opacity_logit = rng.random_range(-1.0..1.0);
            o.rotation = rng.random_range(-3.0..3.0);
            o.scale_log = o.scale_log.map(|s| s + rng.random_range(0.0..0.5));
        }
        t.appearance = att;
    }
}

pub fn random_appearance_upstream(rng: &mut impl Rng, n: usize) -> trisplat::appearance::AppearanceGrads {
    let g = random_upstream(rng, n);
    trisplat::appearance::AppearanceGrads {
        color: Some((0..n).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()),
        depth: g.depth,
        normal: g.normal,
        alpha: g.alpha,
    }
}

pub fn appearance_objective(out: &trisplat::appearance::AppearanceTarget, g: &trisplat::appearance::AppearanceGrads) -> f64 {
    let dot3 = |a: &Option<Vec<Vec3>>, b: &[Vec3]| a.as_ref().map_or(0.0, |a| a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>());
    let dot1 = |a: &Option<Vec<f64>>, b: &[f64]| a.as_ref().map_or(0.0, |a| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>());
    dot3(&g.color, &out.color) + dot3(&g.normal, &out.normal) + dot1(&g.depth, &out.depth) + dot1(&g.alpha, &out.alpha)
}

/// Pairs `z = s m + t` with a fraction of gross outliers.
pub fn corrupted_pairs(rng: &mut impl Rng, n: usize, s: f64, t: f64, outliers: f64) -> (Vec<f64>, Vec<f64>) {
    let m: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
    let z = m
        .iter()
        .map(|v| {
            let clean = s * v + t;
            if rng.random_bool(outliers) {
                clean + rng.random_range(0.5..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                clean
            }
        })
        .collect();
    (m, z)
}

/// Uniform samples on the unit cube surface with outward axis normals.
pub fn cube_points(rng: &mut impl Rng, n: usize) -> Vec<trisplat::planar::OrientedPoint> {
    (0..n)
        .map(|i| {
            let face = i % 6;
            let axis = face / 2;
            let side = if face % 2 == 0 { 0.0 } else { 1.0 };
            let mut p = Vec3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            p[axis] = side;
            let mut normal = Vec3::zeros();
            normal[axis] = if side == 0.0 { -1.0 } else { 1.0 };
            trisplat::planar::OrientedPoint { position: p, normal, source: face as u64 }
        })
        .collect()
}

/// Angle in degrees between a plane normal and the nearest signed axis.
pub fn axis_angle_deg(n: &Vec3) -> f64 {
    let m = n.x.abs().max(n.y.abs()).max(n.z.abs()) / n.norm();
    m.min(1.0).acos().to_degrees()
}

/// Non-overlapping opaque, sharp triangles on a 3x3 grid in front of an
/// axis camera, with initial surfels attached.
pub fn opaque_grid_scene(rng: &mut impl Rng) -> TriangleSoup {
    let mut soup = TriangleSoup::new();
    for gy in 0..3 {
        for gx in 0..3 {
            let z = 3.0 + rng.random_range(-0.2..0.2);
            let center = Vec3::new(0.6 * (gx as f64 - 1.0), 0.6 * (gy as f64 - 1.0), z);
            let tilt = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -1.0).normalize();
            let t = tilt.cross(&unit_vector(rng)).normalize();
            let s = tilt.cross(&t);
            let r = rng.random_range(0.15..0.25);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let verts = [0.0, 1.0, 2.0].map(|i: f64| {
                let a = phase + i * 2.1 + rng.random_range(-0.3..0.3);
                center + (t * a.cos() + s * a.sin()) * r
            });
            let mut tri = TrianglePrimitive::new(0, verts, 1.0 - 1e-12, 500.0, 200.0);
            tri.appearance = trisplat::appearance::AppearanceAttachment::initialize(&tri, 4).unwrap();
            soup.push(tri);
        }
    }
    soup
}

fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let e = b - a;
    let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

/// Outcome of splitting an opaque scene and re-rendering its depth.
pub struct SplitNeutrality {
    pub splits: usize,
    pub checked: usize,
    pub max_depth_error: f64,
}

/// Splits every triangle of an opaque grid scene through `split_pass` and
/// compares depth maps on pixels whose surface hit is farther than `band`
/// from every child edge.
pub fn split_neutrality(seed: u64, band: f64) -> SplitNeutrality {
    use trisplat::control::{split_pass, DensityConfig, GaussianField};
    let mut r = rng(seed);
    let soup = opaque_grid_scene(&mut r);
    let cam = axis_camera(64, 100.0);
    let settings = RenderSettings::default();
    let config = DensityConfig { grad_threshold: 0.0, ..DensityConfig::default() };
    let field = GaussianField::new(trisplat::appearance::spawn_soup(&soup), config.normal_spread);
    let (split, report) = split_pass(&soup, &field, &config);
    let before = trisplat::render::render(&soup, &cam, &settings);
    let after = trisplat::render::render(&split, &cam, &settings);
    let o = cam.center();
    let mut checked = 0;
    let mut max_depth_error: f64 = 0.0;
    for py in 0..cam.height {
        for px in 0..cam.width {
            let d = cam.ray_direction(px, py);
            let near_edge = split.triangles.iter().any(|t| {
                let n = t.normal();
                let denom = n.dot(&d);
                if denom.abs() < 1e-12 {
                    return true;
                }
                let hit = o + d * (n.dot(&(t.vertices[0] - o)) / denom);
                (0..3).any(|k| segment_distance(&hit, &t.vertices[k], &t.vertices[(k + 1) % 3]) < band)
            });
            if near_edge {
                continue;
            }
            let i = py * cam.width + px;
            checked += 1;
            max_depth_error = max_depth_error.max((before.depth[i] - after.depth[i]).abs());
        }
    }
    SplitNeutrality { splits: report.split, checked, max_depth_error }
}
