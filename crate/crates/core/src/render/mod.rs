//! Tile-binned forward and backward rasterization of triangle splats.

pub mod kernel;
pub(crate) mod raster;
pub mod sort;

use nalgebra::Matrix4;

pub use kernel::{gaussian_weight, kernel_weight};
pub use raster::composite_front_to_back;
pub use sort::{bin_items, depth_key, BinEntry, SortItem, TileBins};

use crate::camera::{PinholeCamera, DEFAULT_GUARD_BAND, DEFAULT_NEAR};
use crate::error::{Error, Result};
use crate::geometry::{
    a_hat, subdivide_vertices, tangent_transform, LocalFrame, TangentTransform, Vec3, DEFAULT_SUBDIVISION_DEPTH,
};
use crate::soup::TriangleSoup;
use raster::{Kernel, RasterParams, RasterSplat, SplatGrad, Upstream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub tile_size: usize,
    /// Sub-triangle edge bound used for depth ordering (scene units).
    pub edge_threshold: f64,
    pub transmittance_cutoff: f64,
    pub near: f64,
    pub guard_band: f64,
    pub subdivision_depth_cap: u32,
    /// Extra pixels added around every projected footprint before binning.
    pub tile_margin_px: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            tile_size: 16,
            edge_threshold: f64::INFINITY,
            transmittance_cutoff: 1e-4,
            near: DEFAULT_NEAR,
            guard_band: DEFAULT_GUARD_BAND,
            subdivision_depth_cap: DEFAULT_SUBDIVISION_DEPTH,
            tile_margin_px: 1.0,
        }
    }
}

impl RenderSettings {
    /// Defaults with `edge_threshold = scene_diagonal / 64`.
    pub fn for_scene(scene_diagonal: f64) -> Self {
        Self { edge_threshold: scene_diagonal / 64.0, ..Self::default() }
    }

    pub(crate) fn raster_params(&self) -> RasterParams {
        RasterParams { near: self.near, transmittance_cutoff: self.transmittance_cutoff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedSub {
    pub index: u32,
    /// Camera-frame z of the sub-triangle barycenter.
    pub depth: f64,
    pub rect: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSplat {
    /// Position in the soup.
    pub index: usize,
    pub id: u64,
    pub frame: LocalFrame,
    pub transform: TangentTransform,
    pub a_hat: f64,
    pub subs: Vec<PreparedSub>,
    pub alpha: f64,
    pub sharpness: f64,
    pub smoothness: f64,
    pub normal: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prepared {
    pub splats: Vec<PreparedSplat>,
    /// Ids of degenerate triangles that were skipped.
    pub skipped: Vec<u64>,
}

/// Pixel rectangle covered by the projections of `points`, padded by
/// `margin`. Points behind the near plane make the footprint unbounded.
pub(crate) fn footprint(camera: &PinholeCamera, points: &[Vec3], near: f64, margin: f64) -> Option<[usize; 4]> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut behind = 0;
    for p in points {
        let c = camera.to_camera(p);
        if c.z <= near {
            behind += 1;
            continue;
        }
        let sx = camera.fx * c.x / c.z + camera.cx;
        let sy = camera.fy * c.y / c.z + camera.cy;
        x0 = x0.min(sx);
        x1 = x1.max(sx);
        y0 = y0.min(sy);
        y1 = y1.max(sy);
    }
    if behind == points.len() {
        return None;
    }
    let (w, h) = (camera.width, camera.height);
    if behind > 0 {
        return Some([0, w, 0, h]);
    }
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;
    let rect = [clamp((x0 - margin).floor(), w), clamp((x1 + margin).ceil() + 1.0, w), clamp((y0 - margin).floor(), h), clamp((y1 + margin).ceil() + 1.0, h)];
    (rect[0] < rect[1] && rect[2] < rect[3]).then_some(rect)
}

/// Keeps triangles with at least one visible vertex (original or from the
/// depth-ordering subdivision) and builds their frames and subdivision. Degenerate triangles are skipped and listed.
pub fn cull_and_prepare(soup: &TriangleSoup, camera: &PinholeCamera, settings: &RenderSettings) -> Prepared {
    let mut out = Prepared::default();
    for (index, tri) in soup.triangles.iter().enumerate() {
        let is_visible = |p: &Vec3| camera.project(p, settings.near, settings.guard_band).visible;
        if tri.vertices.iter().all(|p| camera.to_camera(p).z <= settings.near) {
            continue;
        }
        let frame = match LocalFrame::from_vertices(&tri.vertices) {
            Ok(f) if tri.is_finite() => f,
            _ => {
                out.skipped.push(tri.id);
                continue;
            }
        };
        let subs = match subdivide_vertices(&tri.vertices, tri.id, settings.edge_threshold, settings.subdivision_depth_cap) {
            Ok(s) => s,
            Err(Error::SubdivisionBudgetExceeded { partial, .. }) => partial,
            Err(_) => unreachable!("subdivision only fails on budget"),
        };
        // triangles larger than the frustum are kept through their sub-triangle vertices
        if !tri.vertices.iter().any(is_visible) && !subs.iter().any(|s| s.vertices.iter().any(is_visible)) {
            continue;
        }
        let subs = subs
            .iter()
            .filter_map(|s| {
                let rect = footprint(camera, &s.vertices, settings.near, settings.tile_margin_px)?;
                Some(PreparedSub { index: s.index, depth: camera.to_camera(&s.barycenter()).z, rect })
            })
            .collect();
        out.splats.push(PreparedSplat {
            index,
            id: tri.id,
            a_hat: a_hat(&tri.vertices, &frame),
            transform: tangent_transform(&frame),
            frame,
            subs,
            alpha: tri.alpha(),
            sharpness: tri.sharpness(),
            smoothness: tri.smoothness(),
            normal: frame.n,
        });
    }
    out
}

/// Bins every prepared sub-triangle into the tiles it overlaps, each tile
/// sorted by depth with `(triangle, sub)` order breaking ties.
pub fn bin_and_sort(prepared: &Prepared, width: usize, height: usize, tile_size: usize) -> TileBins {
    let items: Vec<SortItem> = prepared
        .splats
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.subs.iter().map(move |sub| SortItem { splat: k as u32, sub: sub.index, depth: sub.depth, rect: sub.rect }))
        .collect();
    bin_items(&items, width, height, tile_size)
}

/// Local point where the ray through pixel `(px, py)` meets the plane of `h`;
/// `None` for rays parallel to the plane or hits behind the near plane.
pub fn ray_tangent_intersection(h: &TangentTransform, camera: &PinholeCamera, pixel: [usize; 2], near: f64) -> Option<[f64; 2]> {
    let m = &h.matrix;
    let col = |c: usize| Vec3::new(m[(0, c)], m[(1, c)], m[(2, c)]);
    let rows = raster::screen_rows(&camera.world_to_screen(), &col(3), &col(0), &col(1));
    let (x, z) = raster::solve_planes(&rows, pixel[0] as f64 + 0.5, pixel[1] as f64 + 0.5)?;
    (z > near).then_some(x)
}

fn raster_splats(prepared: &Prepared, w2s: &Matrix4<f64>) -> Vec<RasterSplat> {
    prepared
        .splats
        .iter()
        .map(|s| {
            let f = &s.frame;
            let kernel = Kernel::Triangle { a_hat: s.a_hat, alpha: s.alpha, sharpness: s.sharpness, smoothness: s.smoothness };
            RasterSplat::new(f.mu, f.t_u * f.s_u, f.t_v * f.s_v, f.n, Vec3::zeros(), kernel, w2s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderTarget {
    pub width: usize,
    pub height: usize,
    /// Ray distance from the camera center, alpha-blended.
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub alpha: Vec<f64>,
    /// Per soup triangle: summed blended weight over all pixels.
    pub contribution: Vec<f64>,
    /// Per soup triangle: contributed to at least one pixel.
    pub visible: Vec<bool>,
    pub skipped: Vec<u64>,
}

pub fn render(soup: &TriangleSoup, camera: &PinholeCamera, settings: &RenderSettings) -> RenderTarget {
    let prepared = cull_and_prepare(soup, camera, settings);
    let bins = bin_and_sort(&prepared, camera.width, camera.height, settings.tile_size);
    let splats = raster_splats(&prepared, &camera.world_to_screen());
    let out = raster::forward(&splats, &bins, camera, &settings.raster_params());
    let mut contribution = vec![0.0; soup.len()];
    let mut visible = vec![false; soup.len()];
    for (k, s) in prepared.splats.iter().enumerate() {
        contribution[s.index] = out.contribution[k];
        visible[s.index] = out.touched[k];
    }
    RenderTarget {
        width: camera.width,
        height: camera.height,
        depth: out.depth,
        normal: out.normal,
        alpha: out.alpha,
        contribution,
        visible,
        skipped: prepared.skipped,
    }
}

/// Upstream gradients of a scalar objective with respect to the rendered maps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderGrads {
    pub depth: Option<Vec<f64>>,
    pub normal: Option<Vec<Vec3>>,
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffers {
    pub vertices: Vec<[Vec3; 3]>,
    pub opacity_logit: Vec<f64>,
    pub sharpness_log: Vec<f64>,
    pub smoothness_log: Vec<f64>,
}

impl GradientBuffers {
    pub fn zeros(n: usize) -> Self {
        Self { vertices: vec![[Vec3::zeros(); 3]; n], opacity_logit: vec![0.0; n], sharpness_log: vec![0.0; n], smoothness_log: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.opacity_logit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity_logit.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.vertices.iter().flatten().all(|v| v.iter().all(|c| c.is_finite()))
            && self.opacity_logit.iter().chain(&self.sharpness_log).chain(&self.smoothness_log).all(|v| v.is_finite())
    }
}

/// Gradient of the frame quantities `(mu, a = s_u t_u, b = s_v t_v, a_hat, n)`
/// pulled back to the three vertices.
pub(crate) fn frame_to_vertices(v: &[Vec3; 3], g_mu: Vec3, g_a: Vec3, g_b: Vec3, g_a_hat: f64, g_n: Vec3) -> [Vec3; 3] {
    let mu = (v[0] + v[1] + v[2]) / 3.0;
    let e = v[0] - mu;
    let q = v[1] - mu;
    let ee = e.norm_squared();
    let ah = e.dot(&q) / ee;

    // b = q - a_hat e, a = e
    let mut g_q = g_b;
    let g_ah = g_a_hat - g_b.dot(&e);
    let mut g_e = g_a - g_b * ah;
    // a_hat = e.q / e.e
    g_q += e * (g_ah / ee);
    g_e += (q - e * (2.0 * ah)) * (g_ah / ee);

    let shared = (g_mu - g_e - g_q) / 3.0;
    let mut out = [shared + g_e, shared + g_q, shared];

    if g_n != Vec3::zeros() {
        let u1 = v[1] - v[0];
        let u2 = v[2] - v[0];
        let c = u1.cross(&u2);
        let cn = c.norm();
        let n = c / cn;
        let g_c = (g_n - n * n.dot(&g_n)) / cn;
        let g_u1 = u2.cross(&g_c);
        let g_u2 = g_c.cross(&u1);
        out[1] += g_u1;
        out[2] += g_u2;
        out[0] -= g_u1 + g_u2;
    }
    out
}

/// Analytic gradients of the rendered maps pulled back to every triangle
/// parameter, replaying the forward traversal.
pub fn backward(soup: &TriangleSoup, camera: &PinholeCamera, settings: &RenderSettings, upstream: &RenderGrads) -> Result<GradientBuffers> {
    let mut out = GradientBuffers::zeros(soup.len());
    if upstream.depth.is_none() && upstream.normal.is_none() && upstream.alpha.is_none() {
        return Ok(out);
    }
    let n_px = camera.pixel_count();
    for (name, len) in [
        ("depth", upstream.depth.as_ref().map(Vec::len)),
        ("normal", upstream.normal.as_ref().map(Vec::len)),
        ("alpha", upstream.alpha.as_ref().map(Vec::len)),
    ] {
        if let Some(len) = len.filter(|l| *l != n_px) {
            return Err(Error::ShapeMismatch(format!("{name} gradient has {len} values, image has {n_px}")));
        }
    }
    let prepared = cull_and_prepare(soup, camera, settings);
    let bins = bin_and_sort(&prepared, camera.width, camera.height, settings.tile_size);
    let splats = raster_splats(&prepared, &camera.world_to_screen());
    let up = Upstream { depth: upstream.depth.as_deref(), normal: upstream.normal.as_deref(), alpha: upstream.alpha.as_deref(), color: None };
    let grads = raster::backward(&splats, &bins, camera, &settings.raster_params(), &up);
    for (s, g) in prepared.splats.iter().zip(&grads) {
        let tri = &soup.triangles[s.index];
        out.vertices[s.index] = splat_grad_to_vertices(&tri.vertices, g);
        let [_, g_alpha, g_sharp, g_smooth] = g.kernel;
        out.opacity_logit[s.index] = g_alpha * s.alpha * (1.0 - s.alpha);
        out.sharpness_log[s.index] = g_sharp * s.sharpness;
        out.smoothness_log[s.index] = g_smooth * s.smoothness;
    }
    for (k, tri) in soup.triangles.iter().enumerate() {
        let finite = out.vertices[k].iter().all(|v| v.iter().all(|c| c.is_finite()))
            && out.opacity_logit[k].is_finite()
            && out.sharpness_log[k].is_finite()
            && out.smoothness_log[k].is_finite();
        if !finite {
            return Err(Error::NonFiniteGradient(tri.id));
        }
    }
    Ok(out)
}

fn splat_grad_to_vertices(v: &[Vec3; 3], g: &SplatGrad) -> [Vec3; 3] {
    frame_to_vertices(v, g.mu, g.a, g.b, g.kernel[0], g.normal)
}
