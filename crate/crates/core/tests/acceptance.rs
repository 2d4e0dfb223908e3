//! Acceptance suite: one line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use common::gradients::*;
use common::*;
use rand::Rng;
use trisplat::eval::{appearance_psnr, mean_geometric_loss, sample_ground_truth, sample_soup};
use trisplat::geometry::*;
use trisplat::io::checkpoint::{encode_checkpoint, parse_checkpoint};
use trisplat::io::pfm::{encode_pfm, parse_pfm, PfmImage};
use trisplat::io::ply::{encode_ply, parse_ply, PlyFormat, PointCloud};
use trisplat::losses::{calibrate_depth_ransac_with, RansacConfig};
use trisplat::planar::{chamfer_distance, detect_planes_pass, extract_lod_planes, LoDSchedule};
use trisplat::render::{ray_tangent_intersection, render, RenderSettings};
use trisplat::synthetic::{gen_synthetic, SceneKind, SyntheticOptions};
use trisplat::train::*;
use trisplat::{PinholeCamera, TriangleSoup, Vec3};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_triangle(r: &mut impl Rng, spread: f64) -> [Vec3; 3] {
    loop {
        let v = [0, 1, 2].map(|_| Vec3::new(r.random_range(-spread..spread), r.random_range(-spread..spread), r.random_range(-spread..spread)));
        if LocalFrame::from_vertices(&v).is_ok() && triangle_area(&v) > 1e-3 * spread * spread {
            return v;
        }
    }
}

fn a1() -> Check {
    let mut r = rng(11);
    let (mut frame_err, mut edge_err, mut bary_err, mut area_err): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..10_000 {
        let v = random_triangle(&mut r, 2.0);
        let tri = TrianglePrimitive::new(0, v, 0.5, 20.0, 5.0);
        let f = LocalFrame::from_vertices(&v).unwrap();
        let scale = max_edge(&v);
        let lc = local_vertex_coords(&tri, &f);
        let h = tangent_transform(&f);
        for (k, c) in lc.coords.iter().enumerate() {
            let w = h.apply(c[0], c[1]);
            frame_err = frame_err.max((Vec3::new(w.x, w.y, w.z) - v[k]).norm() / scale).max((w.w - 1.0).abs());
        }
        let p = v[0] * 0.2 + v[1] * 0.3 + v[2] * 0.5;
        let (u, vv) = ((p - f.mu).dot(&f.t_u) / f.s_u, (p - f.mu).dot(&f.t_v) / f.s_v);
        frame_err = frame_err.max((f.to_world(u, vv) - p).norm() / scale);
        // d0 on p0-p1, d1 on p1-p2, d2 on p2-p0
        for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            let s: f64 = r.random();
            let x = [lc.coords[i][0] * (1.0 - s) + lc.coords[j][0] * s, lc.coords[i][1] * (1.0 - s) + lc.coords[j][1] * s];
            edge_err = edge_err.max(edge_functions(x, lc.a_hat)[k].abs());
        }
        for d in edge_functions([0.0, 0.0], lc.a_hat) {
            bary_err = bary_err.max((d + 1.0).abs());
        }
        let subs = subdivide_for_sorting(&tri, scale / r.random_range(1.5..6.0), 8).unwrap();
        let total: f64 = subs.iter().map(|s| triangle_area(&s.vertices)).sum();
        area_err = area_err.max((total - tri.area()).abs() / tri.area());
    }
    let msg = format!("10^4 triangles: frame {frame_err:.1e}, edge zero sets {edge_err:.1e}, barycenter {bary_err:.1e}, subdivision area {area_err:.1e}");
    ensure(frame_err < 1e-9 && edge_err < 1e-9 && bary_err < 1e-12 && area_err < 1e-9, msg)
}

fn random_camera(r: &mut impl Rng, size: usize) -> PinholeCamera {
    let center = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let target = center + unit_vector(r);
    PinholeCamera::look_at(0, size, size, size as f64 * r.random_range(0.6..1.5), center, target, unit_vector(r))
}

fn a2() -> Check {
    let mut r = rng(12);
    let near = trisplat::camera::DEFAULT_NEAR;
    let (mut worst, mut hits, mut none_ok, mut mismatched) = (0.0f64, 0usize, 0usize, 0usize);
    for _ in 0..100_000 {
        let cam = random_camera(&mut r, 64);
        let v = random_triangle(&mut r, 3.0);
        let f = LocalFrame::from_vertices(&v).unwrap();
        let px = [r.random_range(0..64), r.random_range(0..64)];
        let got = ray_tangent_intersection(&tangent_transform(&f), &cam, px, near);
        let (o, d) = (cam.center(), cam.ray_direction(px[0], px[1]));
        let denom = f.n.dot(&d);
        let t = f.n.dot(&(f.mu - o)) / denom;
        let hit = o + d * t;
        let z = cam.to_camera(&hit).z;
        match got {
            Some(x) if z > near => {
                let u = (hit - f.mu).dot(&f.t_u) / f.s_u;
                let vv = (hit - f.mu).dot(&f.t_v) / f.s_v;
                let e = ((x[0] - u).powi(2) + (x[1] - vv).powi(2)).sqrt() / u.hypot(vv).max(1.0);
                worst = worst.max(e);
                hits += 1;
            }
            None if z <= near => none_ok += 1,
            _ => mismatched += 1,
        }
    }
    let mut parallel_some = 0;
    for _ in 0..1000 {
        let cam = random_camera(&mut r, 64);
        let px = [r.random_range(0..64), r.random_range(0..64)];
        let (o, d) = (cam.center(), cam.ray_direction(px[0], px[1]));
        let side = d.cross(&unit_vector(&mut r)).normalize();
        let base = o + side.cross(&d).normalize() * r.random_range(0.5..2.0);
        let v = [base, base + d * 1.3, base + side * 0.9];
        if ray_tangent_intersection(&tangent_transform(&LocalFrame::from_vertices(&v).unwrap()), &cam, px, near).is_some() {
            parallel_some += 1;
        }
    }
    let msg = format!("{hits} hits, {none_ok} behind-near, worst rel err {worst:.1e}, {mismatched} disagreements, {parallel_some}/1000 parallel returned a hit");
    ensure(worst < 1e-6 && mismatched == 0 && parallel_some == 0, msg)
}

fn a3() -> Check {
    let mut worst = Vec::new();
    let tri = (0..20).map(triangle_gradient_error).fold(0.0, f64::max);
    let gauss = (100..120).map(appearance_gradient_error).fold(0.0, f64::max);
    worst.push(("triangle", tri));
    worst.push(("gaussian", gauss));
    worst.push(("geometric", (0..20).map(geometric_loss_error).fold(0.0, f64::max)));
    worst.push(("detail", (0..20).map(detail_loss_error).fold(0.0, f64::max)));
    worst.push(("ssim", (0..20).map(ssim_error).fold(0.0, f64::max)));
    worst.push(("regularizers", (0..20).map(regularizer_error).fold(0.0, f64::max)));
    let msg = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(worst.iter().all(|(_, e)| *e < 1e-4), format!("20 scenes each: {msg}"))
}

fn tessellated_cube(n: usize) -> TriangleSoup {
    let mut soup = TriangleSoup::new();
    for axis in 0..3 {
        for side in [-1.0, 1.0] {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let point = |i: usize, j: usize| {
                let mut p = Vec3::zeros();
                p[axis] = side;
                p[a] = -1.0 + 2.0 * i as f64 / n as f64;
                p[b] = -1.0 + 2.0 * j as f64 / n as f64;
                p
            };
            for i in 0..n {
                for j in 0..n {
                    let q = [point(i, j), point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)];
                    for t in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                        soup.push(TrianglePrimitive::new(0, t, 1.0 - 1e-9, 200.0, 100.0));
                    }
                }
            }
        }
    }
    soup
}

fn a4() -> Check {
    let soup = tessellated_cube(4);
    let settings = RenderSettings::for_scene(2.0 * 3f64.sqrt());
    let mut r = rng(14);
    let (mut good, mut total) = (0usize, 0usize);
    for _ in 0..10 {
        let center = Vec3::new(r.random_range(-0.6..0.6), r.random_range(-0.6..0.6), r.random_range(-0.6..0.6));
        let cam = PinholeCamera::look_at(0, 64, 64, 40.0, center, center + unit_vector(&mut r), unit_vector(&mut r));
        let out = render(&soup, &cam, &settings);
        for py in 0..64 {
            for px in 0..64 {
                let d = cam.ray_direction(px, py);
                // exit distance of the ray from the box [-1, 1]^3
                let exit = (0..3).filter(|k| d[*k] != 0.0).map(|k| (d[k].signum() - center[k]) / d[k]).fold(f64::INFINITY, f64::min);
                total += 1;
                if (out.depth[py * 64 + px] - exit).abs() <= 0.01 * exit {
                    good += 1;
                }
            }
        }
    }
    let frac = good as f64 / total as f64;
    ensure(frac >= 0.99, format!("{} triangles, 10 interior cameras: {:.2}% of pixels within 1% of ray-cast depth", soup.len(), 100.0 * frac))
}

fn a5() -> Check {
    let bundle = gen_synthetic(SceneKind::CubeRoom, 0, &SyntheticOptions::default());
    let config = TrainConfig { coarse_iters: 2000, fine_iters: 0, lr_vertices_init: 2.5e-3, lr_vertices_final: 2.5e-5, ..TrainConfig::default() };
    let soup = init_from_points(&bundle.points, &config).unwrap();
    let mut trainer = Trainer::new(&bundle, config.clone()).unwrap();
    let train = bundle.train_indices();
    let l0 = mean_geometric_loss(&bundle, &soup, &trainer.supervision, &train, &trainer.settings, config.lambda_d).unwrap();
    let out = trainer.coarse(soup).unwrap();
    let l1 = mean_geometric_loss(&bundle, &out, &trainer.supervision, &train, &trainer.settings, config.lambda_d).unwrap();
    let gt = sample_ground_truth(bundle.ground_truth.as_ref().unwrap(), 200_000, 1);
    let chamfer = chamfer_distance(&gt, &sample_soup(&out, 200_000, 2)).unwrap() / bundle.diagonal();
    let msg = format!("{} points, L_geo {l0:.3} -> {l1:.4} ({:.4}x), Chamfer {:.3}% of diagonal", bundle.points.len(), l1 / l0, 100.0 * chamfer);
    ensure(l1 < 0.1 * l0 && chamfer < 0.01, msg)
}

fn a6() -> Check {
    let bundle = gen_synthetic(SceneKind::TexturedPlane, 0, &SyntheticOptions::default());
    let config = TrainConfig {
        coarse_iters: 1000,
        fine_iters: 1500,
        entropy_window: 500,
        prune_interval: 500,
        split_interval: 250,
        lr_vertices_init: 2.5e-3,
        lr_vertices_final: 2.5e-5,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&bundle, config.clone()).unwrap();
    let test = bundle.test_indices();
    let coarse = trainer.coarse(init_from_points(&bundle.points, &config).unwrap()).unwrap();
    let p0 = appearance_psnr(&bundle, &coarse, &test, &trainer.settings);
    let fine = trainer.fine(coarse).unwrap();
    let p1 = appearance_psnr(&bundle, &fine, &test, &trainer.settings);
    let binary = binary_opacity_fraction(&fine, 0.1);
    let msg = format!("held-out PSNR {p0:.2} -> {p1:.2} dB (+{:.2}), {:.1}% of {} opacities outside (0.1, 0.9)", p1 - p0, 100.0 * binary, fine.len());
    ensure(p1 - p0 >= 5.0 && binary >= 0.9, msg)
}

fn a7() -> Check {
    let bundle = gen_synthetic(SceneKind::CubeRoom, 0, &SyntheticOptions::default());
    let counts: Vec<usize> = [true, false]
        .into_iter()
        .map(|pruning| {
            let config = TrainConfig {
                coarse_iters: 1000,
                fine_iters: 1000,
                entropy_window: 500,
                prune_interval: 200,
                split_interval: 100,
                enable_pruning: pruning,
                lr_vertices_init: 2.5e-3,
                lr_vertices_final: 2.5e-5,
                ..TrainConfig::default()
            };
            let soup = init_from_points(&bundle.points, &config).unwrap();
            train_both(&bundle, soup, &config).unwrap().0.len()
        })
        .collect();
    let ratio = counts[1] as f64 / counts[0] as f64;
    let splits: Vec<SplitNeutrality> = (0..5).map(|s| split_neutrality(s, 2e-3)).collect();
    let max_err = splits.iter().map(|s| s.max_depth_error).fold(0.0, f64::max);
    let checked: usize = splits.iter().map(|s| s.checked).sum();
    let msg = format!("triangles {} with pruning, {} without ({ratio:.2}x); split depth change {max_err:.1e} over {checked} off-edge pixels", counts[0], counts[1]);
    ensure(ratio >= 2.0 && max_err < 1e-6 && splits.iter().all(|s| s.splits > 0), msg)
}

fn a8() -> Check {
    let pts = cube_points(&mut rng(18), 60_000);
    let schedule = LoDSchedule::default();
    let all: Vec<usize> = (0..pts.len()).collect();
    let p = &schedule.passes[0];
    let (planes, _) = detect_planes_pass(&pts, &all, p.epsilon_fraction * trisplat::planar::bbox_diagonal(&pts.iter().map(|q| q.position).collect::<Vec<_>>()), p.min_inliers, p.normal_threshold);
    let worst = planes.iter().map(|q| axis_angle_deg(&q.n())).fold(0.0, f64::max);
    let lods = extract_lod_planes(&pts, &schedule).unwrap();
    let nested = (1..3).all(|l| {
        let coarse: Vec<_> = lods.levels[l - 1].iter().map(|q| q.inliers.clone()).collect();
        coarse.iter().all(|c| lods.levels[l].iter().any(|q| &q.inliers == c))
    });
    let positions: Vec<Vec3> = pts.iter().map(|q| q.position).collect();
    let self_chamfer = chamfer_distance(&positions, &positions).unwrap();
    let msg = format!("LoD0 pass {} planes, worst normal {worst:.3} deg, LoD sets nested {nested}, Chamfer(GT, GT) {self_chamfer}", planes.len());
    ensure(planes.len() == 6 && worst < 1.0 && nested && self_chamfer == 0.0, msg)
}

fn a9() -> Check {
    let (mut worst_s, mut worst_t) = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let (s, t) = (r.random_range(0.5..3.0), r.random_range(-1.0..1.0));
        let (m, z) = corrupted_pairs(&mut r, 200, s, t, 0.3);
        let c = calibrate_depth_ransac_with(&m, &z, &RansacConfig { seed, ..Default::default() }).unwrap();
        worst_s = worst_s.max((c.scale - s).abs() / s.abs());
        worst_t = worst_t.max((c.shift - t).abs() / t.abs().max(1.0));
    }
    ensure(worst_s < 0.01 && worst_t < 0.01, format!("100 seeds, 30% outliers: worst scale err {:.3}%, shift err {:.3}%", 100.0 * worst_s, 100.0 * worst_t))
}

fn a10() -> Check {
    let bundle = gen_synthetic(SceneKind::TwoBox, 3, &SyntheticOptions { image_size: 32, views: 8, points: 80, ..SyntheticOptions::default() });
    let config = TrainConfig { coarse_iters: 150, fine_iters: 100, split_interval: 40, prune_interval: 50, entropy_window: 30, seed: 5, ..TrainConfig::default() };
    let run = || {
        let soup = init_from_points(&bundle.points, &config).unwrap();
        encode_checkpoint(&train_both(&bundle, soup, &config).unwrap().0).unwrap()
    };
    let (a, b) = (run(), run());
    let path = std::path::Path::new("mem");
    let ckpt_back = encode_checkpoint(&parse_checkpoint(&a, path).unwrap()).unwrap();
    let mut r = rng(20);
    let img = PfmImage { width: 7, height: 5, channels: 3, data: (0..105).map(|_| r.random_range(-10.0f32..10.0)).collect() };
    let pfm = encode_pfm(&img);
    let pfm_back = encode_pfm(&parse_pfm(&pfm, path).unwrap());
    let cloud = PointCloud {
        positions: bundle.points.iter().map(|p| p.map(|v| v as f32 as f64)).collect(),
        normals: Some(bundle.points.iter().map(|_| unit_vector(&mut r).map(|v| v as f32 as f64)).collect()),
        colors: Some(bundle.points.iter().map(|_| [r.random(), r.random(), r.random()]).collect()),
        labels: Some(bundle.points.iter().map(|_| r.random_range(-1..30)).collect()),
        faces: vec![[0, 1, 2], [3, 4, 5]],
    };
    let ply_ok = [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian].into_iter().all(|f| {
        let bytes = encode_ply(&cloud, f);
        encode_ply(&parse_ply(&bytes, path).unwrap(), f) == bytes
    });
    let msg = format!("two runs {} B checkpoints identical {}, checkpoint/PFM/PLY round trips {}/{}/{}", a.len(), a == b, ckpt_back == a, pfm_back == pfm, ply_ok);
    ensure(a == b && ckpt_back == a && pfm_back == pfm && ply_ok, msg)
}

fn main() {
    let criteria: [(&str, fn() -> Check, u64); 10] = [
        ("A1", a1, 1),
        ("A2", a2, 10),
        ("A3", a3, 120),
        ("A4", a4, 60),
        ("A5", a5, 600),
        ("A6", a6, 900),
        ("A7", a7, 900),
        ("A8", a8, 60),
        ("A9", a9, 10),
        ("A10", a10, 60),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == name) {
            continue;
        }
        let t0 = Instant::now();
        let result = run();
        let elapsed = t0.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (ok, msg) = match result {
            Ok(m) => (in_time, m),
            Err(m) => (false, m),
        };
        let timing = if in_time { String::new() } else { format!(", over the {budget} s budget") };
        println!("{name} {} {msg} [{:.2} s{timing}]", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        if !ok {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
