mod common;

use common::gradients::*;
use common::*;
use rand::Rng;
use trisplat::losses::*;
use trisplat::Vec3;

/// Direct 2D-window SSIM used as the reference.
fn reference_ssim(a: &[Vec3], b: &[Vec3], w: usize, h: usize) -> f64 {
    let mut weights = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / 4.5).exp();
            total += *v;
        }
    }
    let (c1, c2) = (1e-4, 9e-4);
    let mut acc = 0.0;
    let mut count = 0.0;
    for c in 0..3 {
        for y in 0..=h - 11 {
            for x in 0..=w - 11 {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let g = weights[i][j] / total;
                        let p = (y + i) * w + x + j;
                        let (va, vb) = (a[p][c], b[p][c]);
                        ma += g * va;
                        mb += g * vb;
                        aa += g * va * va;
                        bb += g * vb * vb;
                        ab += g * va * vb;
                    }
                }
                let (sa, sb, sab) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
                acc += (2.0 * ma * mb + c1) * (2.0 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
                count += 1.0;
            }
        }
    }
    acc / count
}

#[test]
fn ssim_matches_reference() {
    let mut r = rng(1);
    let (w, h) = (17, 14);
    let a = random_image(&mut r, w * h);
    let shifted: Vec<Vec3> = a.iter().map(|p| p.add_scalar(0.5)).collect();
    let got = ssim(&a, &shifted, w, h).unwrap().value;
    assert!((got - reference_ssim(&a, &shifted, w, h)).abs() < 1e-6, "{got}");
    let b = random_image(&mut r, w * h);
    assert!((ssim(&a, &b, w, h).unwrap().value - reference_ssim(&a, &b, w, h)).abs() < 1e-6);
}

#[test]
fn step_edge_lights_up_edge_band() {
    let (w, h) = (16, 8);
    // the step falls inside the 2x2 blocks of columns 6-7
    let img: Vec<Vec3> = (0..w * h).map(|i| if i % w <= 6 { Vec3::zeros() } else { Vec3::repeat(1.0) }).collect();
    let m = wavelet_weight_map(&img, w, h);
    for y in 0..h {
        for x in 0..w {
            let v = m[y * w + x];
            if x == 6 || x == 7 {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }
}

#[test]
fn white_noise_has_high_median_weight() {
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let (w, h) = (32, 32);
        let img = random_image(&mut r, w * h);
        let mut m = wavelet_weight_map(&img, w, h);
        m.sort_by(f64::total_cmp);
        assert!(m[m.len() / 2] > 0.2, "seed {seed}: median {}", m[m.len() / 2]);
    }
}

#[test]
fn ransac_survives_outliers() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let (s, t) = (r.random_range(0.5..3.0), r.random_range(-1.0..1.0));
        let (m, z) = corrupted_pairs(&mut r, 200, s, t, 0.3);
        let c = calibrate_depth_ransac_with(&m, &z, &RansacConfig { seed, ..Default::default() }).unwrap();
        assert!((c.scale - s).abs() <= 0.01 * s.abs(), "seed {seed}: {} vs {s}", c.scale);
        assert!((c.shift - t).abs() <= 0.01 * t.abs().max(1.0), "seed {seed}: {} vs {t}", c.shift);
    }
}

#[test]
fn loss_gradients_match_differences() {
    for seed in 0..5 {
        for (name, e) in [("ssim", ssim_error(seed)), ("geometric", geometric_loss_error(seed)), ("detail", detail_loss_error(seed)), ("regularizers", regularizer_error(seed))] {
            assert!(e < 1e-4, "{name} seed {seed}: {e:e}");
        }
    }
}

#[test]
fn scaling_volume_gradient_is_the_partner_scale() {
    let (_, g) = scaling_volume_loss(&[[2.0, 3.0], [0.5, 0.25]]);
    assert_eq!(g[0], [1.5, 1.0]);
}
