//! Central-difference checks returning the worst relative error.

use rand::Rng;
use trisplat::appearance::{backward_appearance, render_appearance, spawn_soup};
use trisplat::geometry::TrianglePrimitive;
use trisplat::losses::*;
use trisplat::render::{backward, render};
use trisplat::{TriangleSoup, Vec3};

use super::*;

pub fn random_image(r: &mut impl Rng, n: usize) -> Vec<Vec3> {
    (0..n).map(|_| Vec3::new(r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0))).collect()
}

type Apply<'a> = &'a dyn Fn(&mut TrianglePrimitive, f64);

fn soup_check(soup: &TriangleSoup, f: &dyn Fn(&TriangleSoup) -> f64, k: usize, analytic: f64, apply: Apply<'_>) -> f64 {
    let h = 1e-5;
    let mut plus = soup.clone();
    apply(&mut plus.triangles[k], h);
    let mut minus = soup.clone();
    apply(&mut minus.triangles[k], -h);
    rel_err(analytic, (f(&plus) - f(&minus)) / (2.0 * h))
}

/// Triangle-kernel backward on a random 32x32 scene of six triangles.
pub fn triangle_gradient_error(seed: u64) -> f64 {
    let size = 32;
    let cam = axis_camera(size, 40.0);
    let settings = smooth_settings(size);
    let mut r = rng(seed);
    let soup = random_scene(&mut r, 6, 3.0, 1.0);
    let up = random_upstream(&mut r, size * size);
    let g = backward(&soup, &cam, &settings, &up).unwrap();
    let f = |s: &TriangleSoup| linear_objective(&render(s, &cam, &settings), &up);
    let mut worst: f64 = 0.0;
    for k in 0..soup.len() {
        let mut check = |a: f64, apply: Apply<'_>| worst = worst.max(soup_check(&soup, &f, k, a, apply));
        for v in 0..3 {
            for c in 0..3 {
                check(g.vertices[k][v][c], &|t, h| t.vertices[v][c] += h);
            }
        }
        check(g.opacity_logit[k], &|t, h| t.opacity_logit += h);
        check(g.sharpness_log[k], &|t, h| t.sharpness_log += h);
        check(g.smoothness_log[k], &|t, h| t.smoothness_log += h);
    }
    worst
}

/// Surfel-kernel backward, chained to triangle vertices and attachment
/// parameters, on four triangles with three surfels each.
pub fn appearance_gradient_error(seed: u64) -> f64 {
    let size = 32;
    let cam = axis_camera(size, 40.0);
    let settings = smooth_settings(size);
    let mut r = rng(seed);
    let mut soup = random_scene(&mut r, 4, 3.0, 1.0);
    with_random_appearance(&mut r, &mut soup, 3);
    let up = random_appearance_upstream(&mut r, size * size);
    let g = backward_appearance(&soup, &cam, &settings, &up).unwrap();
    let f = |s: &TriangleSoup| appearance_objective(&render_appearance(&spawn_soup(s), &cam, &settings), &up);
    let mut worst: f64 = 0.0;
    for k in 0..soup.len() {
        let mut check = |a: f64, apply: Apply<'_>| worst = worst.max(soup_check(&soup, &f, k, a, apply));
        for v in 0..3 {
            for c in 0..3 {
                check(g[k].vertices[v][c], &|t, h| t.vertices[v][c] += h);
            }
        }
        for c in 0..3 {
            check(g[k].scaling[c], &|t, h| t.appearance.scaling[c] += h);
        }
        for i in 0..soup.triangles[k].appearance.offsets.len() {
            let og = &g[k].offsets[i];
            for c in 0..3 {
                check(og.offset[c], &|t, h| t.appearance.offsets[i].offset[c] += h);
                check(og.color[c], &|t, h| t.appearance.offsets[i].color[c] += h);
            }
            check(og.opacity_logit, &|t, h| t.appearance.offsets[i].opacity_logit += h);
            check(og.rotation, &|t, h| t.appearance.offsets[i].rotation += h);
            for c in 0..2 {
                check(og.scale_log[c], &|t, h| t.appearance.offsets[i].scale_log[c] += h);
            }
        }
    }
    worst
}

fn central<F: Fn(f64) -> f64>(f: F, eps: f64) -> f64 {
    (f(eps) - f(-eps)) / (2.0 * eps)
}

/// Geometric loss gradients on random maps.
pub fn geometric_loss_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 50;
    let d: Vec<f64> = (0..n).map(|_| r.random_range(1.0..3.0)).collect();
    let dr: Vec<f64> = (0..n).map(|_| r.random_range(1.0..3.0)).collect();
    let nn: Vec<Vec3> = (0..n).map(|_| unit_vector(&mut r) * r.random_range(0.5..1.0)).collect();
    let nr: Vec<Vec3> = (0..n).map(|_| unit_vector(&mut r)).collect();
    let mask: Vec<bool> = (0..n).map(|_| r.random_bool(0.8)).collect();
    let wt: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
    let l = weighted_geometric_loss(&d, &nn, &dr, &nr, &mask, Some(&wt), 10.0).unwrap();
    let f = |d: &[f64], nn: &[Vec3]| weighted_geometric_loss(d, nn, &dr, &nr, &mask, Some(&wt), 10.0).unwrap().value;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let num = central(
            |e| {
                let mut p = d.clone();
                p[i] += e;
                f(&p, &nn)
            },
            1e-7,
        );
        worst = worst.max(rel_err(l.grad_depth[i], num));
        for c in 0..3 {
            let num = central(
                |e| {
                    let mut p = nn.clone();
                    p[i][c] += e;
                    f(&d, &p)
                },
                1e-7,
            );
            worst = worst.max(rel_err(l.grad_normal[i][c], num));
        }
    }
    worst
}

/// Detail loss gradients (depth, normal, colour, surfel scales) on a 12x12
/// view with a wavelet weight map and SSIM term.
pub fn detail_loss_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (w, h) = (12, 12);
    let n = w * h;
    let d: Vec<f64> = (0..n).map(|_| r.random_range(1.0..3.0)).collect();
    let d_gs: Vec<f64> = (0..n).map(|_| r.random_range(1.0..3.0)).collect();
    let d_ref: Vec<f64> = (0..n).map(|_| r.random_range(1.0..3.0)).collect();
    let nn: Vec<Vec3> = (0..n).map(|_| unit_vector(&mut r) * 0.8).collect();
    let n_gs: Vec<Vec3> = (0..n).map(|_| unit_vector(&mut r)).collect();
    let n_ref: Vec<Vec3> = (0..n).map(|_| unit_vector(&mut r)).collect();
    let c_gs = random_image(&mut r, n);
    let c_gt = random_image(&mut r, n);
    let hf = wavelet_weight_map(&c_gt, w, h);
    let mask = vec![true; n];
    let scales: Vec<[f64; 2]> = (0..7).map(|_| [r.random_range(0.1..1.0), r.random_range(0.1..1.0)]).collect();
    let eval = |d: &[f64], nn: &[Vec3], c: &[Vec3], s: &[[f64; 2]]| {
        let inp = DetailInputs {
            width: w,
            height: h,
            depth: d,
            normal: nn,
            depth_gs: &d_gs,
            normal_gs: &n_gs,
            color_gs: c,
            depth_ref: &d_ref,
            normal_ref: &n_ref,
            color_gt: &c_gt,
            weight_hf: &hf,
            mask: &mask,
            scales: s,
        };
        detail_loss(&inp, &LossWeights::default()).unwrap()
    };
    let base = eval(&d, &nn, &c_gs, &scales);
    let eps = 1e-7;
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let i = r.random_range(0..n);
        let c = r.random_range(0..3);
        let num = central(
            |e| {
                let mut p = d.clone();
                p[i] += e;
                eval(&p, &nn, &c_gs, &scales).value
            },
            eps,
        );
        worst = worst.max(rel_err(base.grad_depth[i], num));
        let num = central(
            |e| {
                let mut p = nn.clone();
                p[i][c] += e;
                eval(&d, &p, &c_gs, &scales).value
            },
            eps,
        );
        worst = worst.max(rel_err(base.grad_normal[i][c], num));
        let num = central(
            |e| {
                let mut p = c_gs.clone();
                p[i][c] += e;
                eval(&d, &nn, &p, &scales).value
            },
            eps,
        );
        worst = worst.max(rel_err(base.grad_color_gs[i][c], num));
    }
    for k in 0..scales.len() {
        for c in 0..2 {
            let num = central(
                |e| {
                    let mut p = scales.clone();
                    p[k][c] += e;
                    eval(&d, &nn, &c_gs, &p).value
                },
                eps,
            );
            worst = worst.max(rel_err(base.grad_scales[k][c], num));
        }
    }
    worst
}

/// SSIM gradient with respect to the second image.
pub fn ssim_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (w, h) = (13, 12);
    let a = random_image(&mut r, w * h);
    let b = random_image(&mut r, w * h);
    let s = ssim(&a, &b, w, h).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let p = r.random_range(0..w * h);
        let c = r.random_range(0..3);
        let num = central(
            |e| {
                let mut q = b.clone();
                q[p][c] += e;
                ssim(&a, &q, w, h).unwrap().value
            },
            1e-6,
        );
        worst = worst.max(rel_err(s.grad_b[p][c], num));
    }
    worst
}

/// Opacity entropy and surfel volume regularizers.
pub fn regularizer_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let alpha: Vec<f64> = (0..20).map(|_| r.random_range(0.01..0.99)).collect();
    let (_, g) = opacity_entropy_loss(&alpha);
    let mut worst: f64 = 0.0;
    for i in 0..alpha.len() {
        let num = central(
            |e| {
                let mut p = alpha.clone();
                p[i] += e;
                opacity_entropy_loss(&p).0
            },
            1e-7,
        );
        worst = worst.max(rel_err(g[i], num));
    }
    let scales: Vec<[f64; 2]> = (0..10).map(|_| [r.random_range(0.1..2.0), r.random_range(0.1..2.0)]).collect();
    let (_, g) = scaling_volume_loss(&scales);
    for k in 0..scales.len() {
        for c in 0..2 {
            let num = central(
                |e| {
                    let mut p = scales.clone();
                    p[k][c] += e;
                    scaling_volume_loss(&p).0
                },
                1e-7,
            );
            worst = worst.max(rel_err(g[k][c], num));
        }
    }
    worst
}
