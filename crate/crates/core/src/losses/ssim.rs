//! Windowed structural similarity over RGB images.
//!
//! Statistics use an 11x11 Gaussian window (spread 1.5) at every position
//! where the window fits inside the image; the result is averaged over those
//! positions and the three channels.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

pub fn gaussian_taps() -> [f64; WINDOW] {
    let mut taps = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = (-x * x / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// Separable valid-mode filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(img: &[f64], w: usize, h: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - WINDOW + 1, h - WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..WINDOW).map(|k| taps[k] * img[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WINDOW).map(|k| taps[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters a `(w - 10) x (h - 10)` map back to
/// `w x h`.
fn filter_valid_adjoint(map: &[f64], w: usize, h: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - WINDOW + 1, h - WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..oh {
        for x in 0..ow {
            let v = map[y * ow + x];
            for k in 0..WINDOW {
                rows[(y + k) * ow + x] += taps[k] * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..ow {
            let v = rows[y * ow + x];
            for k in 0..WINDOW {
                out[y * w + x + k] += taps[k] * v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ssim {
    pub value: f64,
    /// Gradient of `value` with respect to `img_b`.
    pub grad_b: Vec<Vec3>,
}

pub fn ssim(img_a: &[Vec3], img_b: &[Vec3], width: usize, height: usize) -> Result<Ssim> {
    if width < WINDOW || height < WINDOW {
        return Err(Error::ImageTooSmall { width, height, window: WINDOW });
    }
    let n = width * height;
    if img_a.len() != n || img_b.len() != n {
        return Err(Error::ShapeMismatch(format!("ssim inputs {} and {} for {width}x{height}", img_a.len(), img_b.len())));
    }
    let taps = gaussian_taps();
    let positions = ((width - WINDOW + 1) * (height - WINDOW + 1)) as f64;
    let norm = 1.0 / (3.0 * positions);
    let mut value = 0.0;
    let mut grad_b = vec![Vec3::zeros(); n];
    for c in 0..3 {
        let a: Vec<f64> = img_a.iter().map(|p| p[c]).collect();
        let b: Vec<f64> = img_b.iter().map(|p| p[c]).collect();
        let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let [mu_a, mu_b, e_aa, e_bb, e_ab] = [&a, &b, &aa, &bb, &ab].map(|m| filter_valid(m, width, height, &taps));
        let m = mu_a.len();
        let (mut d_mu, mut d_ab, mut d_bb) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            let a1 = 2.0 * ma * mb + C1;
            let a2 = 2.0 * cov + C2;
            let b1 = ma * ma + mb * mb + C1;
            let b2 = var_a + var_b + C2;
            let s = a1 * a2 / (b1 * b2);
            value += s;
            let den = b1 * b2;
            d_mu[i] = norm * ((2.0 * ma * a2 - 2.0 * ma * a1) / den - s * (2.0 * mb / b1 - 2.0 * mb / b2));
            d_ab[i] = norm * 2.0 * a1 / den;
            d_bb[i] = -norm * s / b2;
        }
        let g_mu = filter_valid_adjoint(&d_mu, width, height, &taps);
        let g_ab = filter_valid_adjoint(&d_ab, width, height, &taps);
        let g_bb = filter_valid_adjoint(&d_bb, width, height, &taps);
        for p in 0..n {
            grad_b[p][c] = g_mu[p] + g_ab[p] * a[p] + 2.0 * g_bb[p] * b[p];
        }
    }
    Ok(Ssim { value: value * norm, grad_b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_score_one() {
        let img: Vec<Vec3> = (0..14 * 12).map(|i| Vec3::repeat((i % 7) as f64 / 7.0)).collect();
        let s = ssim(&img, &img, 14, 12).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_small_is_an_error() {
        let img = vec![Vec3::zeros(); 100];
        assert!(matches!(ssim(&img, &img, 10, 10), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn taps_sum_to_one() {
        assert!((gaussian_taps().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
