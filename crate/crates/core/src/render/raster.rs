//! Shared ray-splat compositing core for triangle and surfel kernels.
//!
//! A splat is a tangent plane `x(u, v) = mu + u a + v b` plus a kernel in
//! `(u, v)`. Pixels intersect the plane through the two homogeneous screen
//! planes, evaluate the kernel and composite front to back. Gradients of the
//! per-splat quantities `(mu, a, b, n, color, kernel params)` come from
//! replaying the forward walk.

use nalgebra::Matrix4;
use rayon::prelude::*;

use super::kernel::{gaussian_weight, triangle_kernel_grad};
use super::sort::TileBins;
use crate::camera::PinholeCamera;
use crate::geometry::Vec3;

/// Determinant threshold, relative to the coefficient magnitudes, below
/// which the screen planes are treated as parallel to the splat.
pub const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    Triangle { a_hat: f64, alpha: f64, sharpness: f64, smoothness: f64 },
    Gaussian { opacity: f64 },
}

impl Kernel {
    #[inline]
    fn weight(&self, x: [f64; 2]) -> f64 {
        match *self {
            Kernel::Triangle { a_hat, alpha, sharpness, smoothness } => {
                super::kernel::kernel_weight(x, a_hat, sharpness, smoothness, alpha)
            }
            Kernel::Gaussian { opacity } => gaussian_weight(x, opacity),
        }
    }

    /// `(w, dw/du, dw/dv, dw/dparams)`. Params are `(a_hat, alpha,
    /// sharpness, smoothness)` for triangles and `(opacity, ..)` for surfels.
    #[inline]
    fn weight_grad(&self, x: [f64; 2]) -> (f64, [f64; 2], [f64; 4]) {
        match *self {
            Kernel::Triangle { a_hat, alpha, sharpness, smoothness } => {
                let g = triangle_kernel_grad(x, a_hat, sharpness, smoothness, alpha);
                (g.w, [g.du, g.dv], [g.da_hat, g.dalpha, g.dsharpness, g.dsmoothness])
            }
            Kernel::Gaussian { opacity } => {
                let g = (-(x[0] * x[0] + x[1] * x[1]) * 0.5).exp();
                let w = opacity * g;
                (w, [-x[0] * w, -x[1] * w], [g, 0.0, 0.0, 0.0])
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RasterSplat {
    pub mu: Vec3,
    pub a: Vec3,
    pub b: Vec3,
    pub normal: Vec3,
    pub color: Vec3,
    pub kernel: Kernel,
    /// Rows 0, 1 and 3 of `W H`, restricted to the `a`, `b`, `mu` columns.
    rows: [[f64; 3]; 3],
}

impl RasterSplat {
    pub fn new(mu: Vec3, a: Vec3, b: Vec3, normal: Vec3, color: Vec3, kernel: Kernel, world_to_screen: &Matrix4<f64>) -> Self {
        Self { mu, a, b, normal, color, kernel, rows: screen_rows(world_to_screen, &mu, &a, &b) }
    }
}

pub(crate) fn screen_rows(w: &Matrix4<f64>, mu: &Vec3, a: &Vec3, b: &Vec3) -> [[f64; 3]; 3] {
    let row = |r: usize| {
        let wr = Vec3::new(w[(r, 0)], w[(r, 1)], w[(r, 2)]);
        [wr.dot(a), wr.dot(b), wr.dot(mu) + w[(r, 3)]]
    };
    [row(0), row(1), row(3)]
}

/// Local `(u, v)` where the pixel ray meets the splat plane, from the
/// homogeneous planes `h_u = (WH)^T (-1, 0, 0, x)` and
/// `h_v = (WH)^T (0, -1, 0, y)`. Also returns the camera-space z.
#[inline]
pub(crate) fn solve_planes(rows: &[[f64; 3]; 3], x: f64, y: f64) -> Option<([f64; 2], f64)> {
    let [m0, m1, m3] = rows;
    let hu = [-m0[0] + x * m3[0], -m0[1] + x * m3[1], -m0[2] + x * m3[2]];
    let hv = [-m1[0] + y * m3[0], -m1[1] + y * m3[1], -m1[2] + y * m3[2]];
    let det = hu[0] * hv[1] - hu[1] * hv[0];
    let scale = (hu[0].abs() + hu[1].abs()) * (hv[0].abs() + hv[1].abs());
    if !(det.abs() >= PARALLEL_EPS * scale) || scale == 0.0 {
        return None;
    }
    let u = (hu[1] * hv[2] - hu[2] * hv[1]) / det;
    let v = (hu[2] * hv[0] - hu[0] * hv[2]) / det;
    let z = m3[0] * u + m3[1] * v + m3[2];
    Some(([u, v], z))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RasterParams {
    pub near: f64,
    pub transmittance_cutoff: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RasterOutput {
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub alpha: Vec<f64>,
    pub color: Vec<Vec3>,
    pub contribution: Vec<f64>,
    pub touched: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SplatGrad {
    pub mu: Vec3,
    pub a: Vec3,
    pub b: Vec3,
    pub normal: Vec3,
    pub color: Vec3,
    pub kernel: [f64; 4],
}

impl SplatGrad {
    fn add(&mut self, o: &SplatGrad) {
        self.mu += o.mu;
        self.a += o.a;
        self.b += o.b;
        self.normal += o.normal;
        self.color += o.color;
        for k in 0..4 {
            self.kernel[k] += o.kernel[k];
        }
    }
}

/// Upstream gradients on the composited images; absent channels are zero.
pub(crate) struct Upstream<'a> {
    pub depth: Option<&'a [f64]>,
    pub normal: Option<&'a [Vec3]>,
    pub alpha: Option<&'a [f64]>,
    pub color: Option<&'a [Vec3]>,
}

/// Compact per-tile view of the splats in its list.
struct TileSlots {
    splats: Vec<u32>,
    entry_slot: Vec<u32>,
}

fn tile_slots(bins: &TileBins, t: usize, n_splats: usize) -> TileSlots {
    let entries = bins.tile(t);
    let mut slot_of = vec![u32::MAX; n_splats];
    let mut splats = Vec::new();
    let entry_slot = entries
        .iter()
        .map(|e| {
            let s = &mut slot_of[e.splat as usize];
            if *s == u32::MAX {
                *s = splats.len() as u32;
                splats.push(e.splat);
            }
            *s
        })
        .collect();
    TileSlots { splats, entry_slot }
}

#[derive(Clone, Copy)]
struct Hit {
    slot: u32,
    x: [f64; 2],
    depth: f64,
    w: f64,
    transmittance: f64,
}

/// Walks one pixel's sorted list front to back, calling `on_hit` for every
/// composited splat. Each splat composites at most once per pixel.
#[inline]
#[allow(clippy::too_many_arguments)]
fn walk_pixel(
    splats: &[RasterSplat],
    slots: &TileSlots,
    entries: &[super::sort::BinEntry],
    stamp: &mut [u32],
    pixel_stamp: u32,
    x: f64,
    y: f64,
    center: &Vec3,
    params: &RasterParams,
    mut on_hit: impl FnMut(Hit),
) {
    let mut transmittance = 1.0;
    for (k, _) in entries.iter().enumerate() {
        let slot = slots.entry_slot[k];
        if stamp[slot as usize] == pixel_stamp {
            continue;
        }
        stamp[slot as usize] = pixel_stamp;
        let s = &splats[slots.splats[slot as usize] as usize];
        let Some((local, z)) = solve_planes(&s.rows, x, y) else { continue };
        if z <= params.near {
            continue;
        }
        let w = s.kernel.weight(local);
        if !(w > 0.0) {
            continue;
        }
        let world = s.mu + s.a * local[0] + s.b * local[1];
        let depth = (world - center).norm();
        on_hit(Hit { slot, x: local, depth, w, transmittance });
        transmittance *= 1.0 - w;
        if transmittance < params.transmittance_cutoff {
            break;
        }
    }
}

struct TileForward {
    bounds: [usize; 4],
    depth: Vec<f64>,
    normal: Vec<Vec3>,
    alpha: Vec<f64>,
    color: Vec<Vec3>,
    splats: Vec<u32>,
    contribution: Vec<f64>,
}

pub(crate) fn forward(splats: &[RasterSplat], bins: &TileBins, camera: &PinholeCamera, params: &RasterParams) -> RasterOutput {
    let center = camera.center();
    let tiles: Vec<TileForward> = (0..bins.tile_count())
        .into_par_iter()
        .map(|t| {
            let bounds = bins.tile_bounds(t);
            let [x0, x1, y0, y1] = bounds;
            let n_px = (x1 - x0) * (y1 - y0);
            let slots = tile_slots(bins, t, splats.len());
            let entries = bins.tile(t);
            let mut out = TileForward {
                bounds,
                depth: vec![0.0; n_px],
                normal: vec![Vec3::zeros(); n_px],
                alpha: vec![0.0; n_px],
                color: vec![Vec3::zeros(); n_px],
                contribution: vec![0.0; slots.splats.len()],
                splats: Vec::new(),
            };
            let mut stamp = vec![0u32; slots.splats.len()];
            let mut p = 0;
            for py in y0..y1 {
                for px in x0..x1 {
                    let (mut d, mut n, mut a, mut c) = (0.0, Vec3::zeros(), 0.0, Vec3::zeros());
                    walk_pixel(splats, &slots, entries, &mut stamp, p as u32 + 1, px as f64 + 0.5, py as f64 + 0.5, &center, params, |hit| {
                        let s = &splats[slots.splats[hit.slot as usize] as usize];
                        let weight = hit.w * hit.transmittance;
                        d += hit.depth * weight;
                        n += s.normal * weight;
                        c += s.color * weight;
                        a += weight;
                        out.contribution[hit.slot as usize] += weight;
                    });
                    out.depth[p] = d;
                    out.normal[p] = n;
                    out.alpha[p] = a;
                    out.color[p] = c;
                    p += 1;
                }
            }
            out.splats = slots.splats;
            out
        })
        .collect();

    let n = camera.pixel_count();
    let mut result = RasterOutput {
        depth: vec![0.0; n],
        normal: vec![Vec3::zeros(); n],
        alpha: vec![0.0; n],
        color: vec![Vec3::zeros(); n],
        contribution: vec![0.0; splats.len()],
        touched: vec![false; splats.len()],
    };
    for tile in tiles {
        let [x0, x1, y0, y1] = tile.bounds;
        let mut p = 0;
        for py in y0..y1 {
            for px in x0..x1 {
                let i = py * camera.width + px;
                result.depth[i] = tile.depth[p];
                result.normal[i] = tile.normal[p];
                result.alpha[i] = tile.alpha[p];
                result.color[i] = tile.color[p];
                p += 1;
            }
        }
        for (slot, s) in tile.splats.iter().enumerate() {
            let c = tile.contribution[slot];
            result.contribution[*s as usize] += c;
            if c > 0.0 {
                result.touched[*s as usize] = true;
            }
        }
    }
    result
}

pub(crate) fn backward(
    splats: &[RasterSplat],
    bins: &TileBins,
    camera: &PinholeCamera,
    params: &RasterParams,
    upstream: &Upstream<'_>,
) -> Vec<SplatGrad> {
    let center = camera.center();
    let tiles: Vec<(Vec<u32>, Vec<SplatGrad>)> = (0..bins.tile_count())
        .into_par_iter()
        .map(|t| {
            let [x0, x1, y0, y1] = bins.tile_bounds(t);
            let slots = tile_slots(bins, t, splats.len());
            let entries = bins.tile(t);
            let mut grads = vec![SplatGrad::default(); slots.splats.len()];
            let mut stamp = vec![0u32; slots.splats.len()];
            let mut hits: Vec<Hit> = Vec::new();
            let mut p = 0u32;
            for py in y0..y1 {
                for px in x0..x1 {
                    p += 1;
                    let i = py * camera.width + px;
                    let g_d = upstream.depth.map_or(0.0, |g| g[i]);
                    let g_n = upstream.normal.map_or(Vec3::zeros(), |g| g[i]);
                    let g_a = upstream.alpha.map_or(0.0, |g| g[i]);
                    let g_c = upstream.color.map_or(Vec3::zeros(), |g| g[i]);
                    if g_d == 0.0 && g_a == 0.0 && g_n == Vec3::zeros() && g_c == Vec3::zeros() {
                        continue;
                    }
                    hits.clear();
                    let (xs, ys) = (px as f64 + 0.5, py as f64 + 0.5);
                    walk_pixel(splats, &slots, entries, &mut stamp, p, xs, ys, &center, params, |hit| hits.push(hit));
                    if hits.is_empty() {
                        continue;
                    }
                    let ray = camera.ray_direction(px, py);
                    // rest = composite of f over the splats behind the current one
                    let mut rest = 0.0;
                    for hit in hits.iter().rev() {
                        let s = &splats[slots.splats[hit.slot as usize] as usize];
                        let f = g_d * hit.depth + g_n.dot(&s.normal) + g_a + g_c.dot(&s.color);
                        let weight = hit.w * hit.transmittance;
                        let dl_dw = hit.transmittance * (f - rest);
                        rest = hit.w * f + (1.0 - hit.w) * rest;

                        let (_, dw_dx, dw_dp) = s.kernel.weight_grad(hit.x);
                        let g = &mut grads[hit.slot as usize];
                        g.normal += g_n * weight;
                        g.color += g_c * weight;
                        for k in 0..4 {
                            g.kernel[k] += dl_dw * dw_dp[k];
                        }
                        // (u, v, ray length) solves [a b -r] z = C - mu
                        let g_z = Vec3::new(dl_dw * dw_dx[0], dl_dw * dw_dx[1], g_d * weight);
                        let neg_r = -ray;
                        let bxc = s.b.cross(&neg_r);
                        let cxa = neg_r.cross(&s.a);
                        let axb = s.a.cross(&s.b);
                        let det = s.a.dot(&bxc);
                        if det.abs() < 1e-300 {
                            continue;
                        }
                        let y = (bxc * g_z.x + cxa * g_z.y + axb * g_z.z) / det;
                        g.a -= y * hit.x[0];
                        g.b -= y * hit.x[1];
                        g.mu -= y;
                    }
                }
            }
            (slots.splats, grads)
        })
        .collect();

    let mut total = vec![SplatGrad::default(); splats.len()];
    for (ids, grads) in tiles {
        for (s, g) in ids.iter().zip(grads.iter()) {
            total[*s as usize].add(g);
        }
    }
    total
}

/// Front-to-back compositing of `(weight, depth, normal)` samples, returning
/// `(D, N, A)`.
pub fn composite_front_to_back(samples: &[(f64, f64, Vec3)]) -> (f64, Vec3, f64) {
    let mut t = 1.0;
    let (mut d, mut n, mut a) = (0.0, Vec3::zeros(), 0.0);
    for (w, depth, normal) in samples {
        let c = w * t;
        d += depth * c;
        n += normal * c;
        a += c;
        t *= 1.0 - w;
    }
    (d, n, a)
}
