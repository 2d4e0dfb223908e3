//! Surfel Gaussians attached to triangles: spawn, render and backward.
//!
//! Each triangle owns `k` offsets. Offset `i` spawns a surfel at
//! `mu + o_x l_x t_u + o_y l_y t_v + o_z l_z n`, lying in the triangle's
//! tangent plane rotated in-plane by its own angle.

use crate::camera::PinholeCamera;
use crate::error::{Error, Result};
use crate::geometry::{logistic, logit, LocalFrame, TrianglePrimitive, Vec3};
use crate::render::raster::{self, Kernel, RasterSplat, Upstream};
use crate::render::{bin_items, footprint, frame_to_vertices, RenderSettings, SortItem};
use crate::soup::TriangleSoup;

pub const FEATURE_DIM: usize = 32;
pub const DEFAULT_OFFSETS: usize = 10;
/// Surfels are binned over `±FOOTPRINT_SIGMAS` standard deviations.
pub const FOOTPRINT_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianOffset {
    pub offset: Vec3,
    pub color: Vec3,
    pub opacity_logit: f64,
    pub scale_log: [f64; 2],
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceAttachment {
    /// Context feature, carried but not decoded.
    pub feature: [f64; FEATURE_DIM],
    pub scaling: Vec3,
    pub offsets: Vec<GaussianOffset>,
}

impl Default for AppearanceAttachment {
    fn default() -> Self {
        Self { feature: [0.0; FEATURE_DIM], scaling: Vec3::zeros(), offsets: Vec::new() }
    }
}

impl AppearanceAttachment {
    /// `k` gray surfels spread over the triangle on a fixed low-discrepancy
    /// pattern, with `l_v = 0.1 s_u`.
    pub fn initialize(tri: &TrianglePrimitive, k: usize) -> Result<Self> {
        let frame = LocalFrame::from_vertices(&tri.vertices)?;
        let l = 0.1 * frame.s_u;
        let sigma = 0.5 * (tri.area() / k as f64).sqrt();
        let offsets = (0..k)
            .map(|i| {
                // R2 sequence warped onto the triangle
                let g = 1.324_717_957_244_746;
                let (mut r1, mut r2) = ((0.5 + (i as f64 + 1.0) / g).fract(), (0.5 + (i as f64 + 1.0) / (g * g)).fract());
                if r1 + r2 > 1.0 {
                    (r1, r2) = (1.0 - r1, 1.0 - r2);
                }
                let v = &tri.vertices;
                let p = v[0] + (v[1] - v[0]) * r1 + (v[2] - v[0]) * r2;
                let d = p - frame.mu;
                GaussianOffset {
                    offset: Vec3::new(d.dot(&frame.t_u) / l, d.dot(&frame.t_v) / l, 0.0),
                    color: Vec3::repeat(0.5),
                    opacity_logit: logit(0.5),
                    scale_log: [sigma.ln(); 2],
                    rotation: 0.0,
                }
            })
            .collect();
        Ok(Self { feature: [0.0; FEATURE_DIM], scaling: Vec3::repeat(l), offsets })
    }

    /// Copy of the attachment re-centered on a child with barycenter
    /// `child_mu` and frame `child`: every spawned center keeps its world
    /// position.
    pub fn recentered(&self, parent: &LocalFrame, child: &LocalFrame) -> Self {
        let mut out = self.clone();
        let l = self.scaling;
        for o in &mut out.offsets {
            let world = spawn_center(parent, &l, &o.offset);
            let d = world - child.mu;
            let safe = |x: f64, s: f64| if s.abs() > 0.0 { x / s } else { 0.0 };
            o.offset = Vec3::new(safe(d.dot(&child.t_u), l.x), safe(d.dot(&child.t_v), l.y), safe(d.dot(&child.n), l.z));
        }
        out
    }
}

pub fn spawn_center(frame: &LocalFrame, scaling: &Vec3, offset: &Vec3) -> Vec3 {
    frame.mu + frame.t_u * (offset.x * scaling.x) + frame.t_v * (offset.y * scaling.y) + frame.n * (offset.z * scaling.z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfelGaussian {
    pub center: Vec3,
    pub t_u: Vec3,
    pub t_v: Vec3,
    pub n: Vec3,
    pub scales: [f64; 2],
    pub opacity: f64,
    pub color: Vec3,
    /// Soup index of the owning triangle and offset index within it.
    pub parent: usize,
    pub slot: usize,
}

fn spawn_with_frame(frame: &LocalFrame, att: &AppearanceAttachment, parent: usize) -> Vec<SurfelGaussian> {
    att.offsets
        .iter()
        .enumerate()
        .map(|(slot, o)| {
            let (s, c) = o.rotation.sin_cos();
            SurfelGaussian {
                center: spawn_center(frame, &att.scaling, &o.offset),
                t_u: frame.t_u * c + frame.t_v * s,
                t_v: frame.t_v * c - frame.t_u * s,
                n: frame.n,
                scales: o.scale_log.map(f64::exp),
                opacity: logistic(o.opacity_logit),
                color: o.color,
                parent,
                slot,
            }
        })
        .collect()
}

/// Surfels of one triangle; degenerate triangles spawn nothing.
pub fn spawn_gaussians(tri: &TrianglePrimitive) -> Vec<SurfelGaussian> {
    match LocalFrame::from_vertices(&tri.vertices) {
        Ok(frame) => spawn_with_frame(&frame, &tri.appearance, 0),
        Err(_) => Vec::new(),
    }
}

/// Surfels of every triangle, `parent` set to the soup index.
pub fn spawn_soup(soup: &TriangleSoup) -> Vec<SurfelGaussian> {
    soup.triangles
        .iter()
        .enumerate()
        .filter_map(|(i, t)| LocalFrame::from_vertices(&t.vertices).ok().map(|f| spawn_with_frame(&f, &t.appearance, i)))
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceTarget {
    pub width: usize,
    pub height: usize,
    pub color: Vec<Vec3>,
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub alpha: Vec<f64>,
}

struct Prepared {
    splats: Vec<RasterSplat>,
    /// Index into the surfel list for every raster splat.
    source: Vec<usize>,
    bins: crate::render::TileBins,
}

fn prepare(gaussians: &[SurfelGaussian], camera: &PinholeCamera, settings: &RenderSettings) -> Prepared {
    let w2s = camera.world_to_screen();
    let mut splats = Vec::new();
    let mut source = Vec::new();
    let mut items = Vec::new();
    for (i, g) in gaussians.iter().enumerate() {
        let a = g.t_u * g.scales[0];
        let b = g.t_v * g.scales[1];
        let k = FOOTPRINT_SIGMAS;
        let corners = [g.center + (a + b) * k, g.center + (a - b) * k, g.center - (a + b) * k, g.center - (a - b) * k];
        let Some(rect) = footprint(camera, &corners, settings.near, settings.tile_margin_px) else { continue };
        items.push(SortItem { splat: splats.len() as u32, sub: 0, depth: camera.to_camera(&g.center).z, rect });
        splats.push(RasterSplat::new(g.center, a, b, g.n, g.color, Kernel::Gaussian { opacity: g.opacity }, &w2s));
        source.push(i);
    }
    let bins = bin_items(&items, camera.width, camera.height, settings.tile_size);
    Prepared { splats, source, bins }
}

pub fn render_appearance(gaussians: &[SurfelGaussian], camera: &PinholeCamera, settings: &RenderSettings) -> AppearanceTarget {
    let p = prepare(gaussians, camera, settings);
    let out = raster::forward(&p.splats, &p.bins, camera, &settings.raster_params());
    AppearanceTarget { width: camera.width, height: camera.height, color: out.color, depth: out.depth, normal: out.normal, alpha: out.alpha }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AppearanceGrads {
    pub color: Option<Vec<Vec3>>,
    pub depth: Option<Vec<f64>>,
    pub normal: Option<Vec<Vec3>>,
    pub alpha: Option<Vec<f64>>,
}

/// Per-surfel gradient of the rendered maps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SurfelGrad {
    pub center: Vec3,
    pub t_u: Vec3,
    pub t_v: Vec3,
    pub n: Vec3,
    pub scales: [f64; 2],
    pub opacity: f64,
    pub color: Vec3,
}

/// Gradients with respect to the surfel quantities themselves.
pub fn backward_surfels(gaussians: &[SurfelGaussian], camera: &PinholeCamera, settings: &RenderSettings, upstream: &AppearanceGrads) -> Vec<SurfelGrad> {
    let mut out = vec![SurfelGrad::default(); gaussians.len()];
    if upstream.color.is_none() && upstream.depth.is_none() && upstream.normal.is_none() && upstream.alpha.is_none() {
        return out;
    }
    let p = prepare(gaussians, camera, settings);
    let up = Upstream {
        depth: upstream.depth.as_deref(),
        normal: upstream.normal.as_deref(),
        alpha: upstream.alpha.as_deref(),
        color: upstream.color.as_deref(),
    };
    let grads = raster::backward(&p.splats, &p.bins, camera, &settings.raster_params(), &up);
    for (g, &i) in grads.iter().zip(&p.source) {
        let s = &gaussians[i];
        out[i] = SurfelGrad {
            center: g.mu,
            t_u: g.a * s.scales[0],
            t_v: g.b * s.scales[1],
            n: g.normal,
            scales: [g.a.dot(&s.t_u), g.b.dot(&s.t_v)],
            opacity: g.kernel[0],
            color: g.color,
        };
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetGrad {
    pub offset: Vec3,
    pub color: Vec3,
    pub opacity_logit: f64,
    pub scale_log: [f64; 2],
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttachmentGrad {
    pub vertices: [Vec3; 3],
    pub scaling: Vec3,
    pub offsets: Vec<OffsetGrad>,
}

/// Gradients of the rendered appearance maps with respect to every
/// attachment field and the parent vertices, chained through the spawn.
pub fn backward_appearance(soup: &TriangleSoup, camera: &PinholeCamera, settings: &RenderSettings, upstream: &AppearanceGrads) -> Result<Vec<AttachmentGrad>> {
    let gaussians = spawn_soup(soup);
    let surfel_grads = backward_surfels(&gaussians, camera, settings, upstream);
    let mut out: Vec<AttachmentGrad> = soup
        .triangles
        .iter()
        .map(|t| AttachmentGrad {
            vertices: [Vec3::zeros(); 3],
            scaling: Vec3::zeros(),
            offsets: t
                .appearance
                .offsets
                .iter()
                .map(|_| OffsetGrad { offset: Vec3::zeros(), color: Vec3::zeros(), opacity_logit: 0.0, scale_log: [0.0; 2], rotation: 0.0 })
                .collect(),
        })
        .collect();

    // frame-level accumulators per triangle: (mu, t_u, t_v, n)
    let mut frame_grads = vec![[Vec3::zeros(); 4]; soup.len()];
    for (g, sg) in gaussians.iter().zip(&surfel_grads) {
        let tri = &soup.triangles[g.parent];
        let att = &tri.appearance;
        let o = &att.offsets[g.slot];
        let frame = LocalFrame::from_vertices(&tri.vertices)?;
        let (sin, cos) = o.rotation.sin_cos();

        let og = &mut out[g.parent].offsets[g.slot];
        og.color = sg.color;
        og.opacity_logit = sg.opacity * g.opacity * (1.0 - g.opacity);
        og.scale_log = [sg.scales[0] * g.scales[0], sg.scales[1] * g.scales[1]];
        og.rotation = sg.t_u.dot(&g.t_v) - sg.t_v.dot(&g.t_u);
        let l = att.scaling;
        let gc = sg.center;
        og.offset = Vec3::new(l.x * frame.t_u.dot(&gc), l.y * frame.t_v.dot(&gc), l.z * frame.n.dot(&gc));
        out[g.parent].scaling += Vec3::new(o.offset.x * frame.t_u.dot(&gc), o.offset.y * frame.t_v.dot(&gc), o.offset.z * frame.n.dot(&gc));

        let fg = &mut frame_grads[g.parent];
        fg[0] += gc;
        fg[1] += sg.t_u * cos - sg.t_v * sin + gc * (o.offset.x * l.x);
        fg[2] += sg.t_u * sin + sg.t_v * cos + gc * (o.offset.y * l.y);
        fg[3] += sg.n + gc * (o.offset.z * l.z);
    }

    for (k, tri) in soup.triangles.iter().enumerate() {
        let [g_mu, mut g_tu, g_tv, mut g_n] = frame_grads[k];
        if g_mu == Vec3::zeros() && g_tu == Vec3::zeros() && g_tv == Vec3::zeros() && g_n == Vec3::zeros() {
            continue;
        }
        let frame = LocalFrame::from_vertices(&tri.vertices)?;
        // t_v = n x t_u
        g_n += frame.t_u.cross(&g_tv);
        g_tu += g_tv.cross(&frame.n);
        // t_u = e / |e|
        let g_e = (g_tu - frame.t_u * frame.t_u.dot(&g_tu)) / frame.s_u;
        out[k].vertices = frame_to_vertices(&tri.vertices, g_mu, g_e, Vec3::zeros(), 0.0, g_n);
        let finite = out[k].vertices.iter().chain(std::iter::once(&out[k].scaling)).all(|v| v.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(Error::NonFiniteGradient(tri.id));
        }
    }
    Ok(out)
}
