//! Objectives and supervision preparation.

pub mod calibration;
pub mod geometric;
pub mod regularizers;
pub mod ssim;
pub mod wavelet;

pub use calibration::{calibrate_depth_ransac, calibrate_depth_ransac_with, CalibrationModel, RansacConfig};
pub use geometric::{geometric_loss, weighted_geometric_loss, GeometricLoss};
pub use regularizers::{opacity_entropy_loss, scaling_volume_loss};
pub use ssim::{ssim, Ssim};
pub use wavelet::{luminance, wavelet_weight_map};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use geometric::sign;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_rgb: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_d: 10.0, lambda_rgb: 10.0, lambda_c: 0.2, lambda_s: 0.01 }
    }
}

/// Reference rasters for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionSet {
    pub width: usize,
    pub height: usize,
    /// Ray-depth convention.
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
    pub color: Vec<Vec3>,
    pub depth_valid: Vec<bool>,
    pub normal_valid: Vec<bool>,
    pub weight_hf: Vec<f64>,
}

impl SupervisionSet {
    /// Builds the set and its wavelet weight map.
    pub fn new(width: usize, height: usize, depth: Vec<f64>, normal: Vec<Vec3>, color: Vec<Vec3>) -> Self {
        let depth_valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        let normal_valid = normal.iter().map(|n| (n.norm() - 1.0).abs() < 1e-3).collect();
        let weight_hf = wavelet_weight_map(&color, width, height);
        Self { width, height, depth, normal, color, depth_valid, normal_valid, weight_hf }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.depth_valid.iter().zip(&self.normal_valid).map(|(a, b)| *a && *b).collect()
    }
}

pub struct DetailInputs<'a> {
    pub width: usize,
    pub height: usize,
    pub depth: &'a [f64],
    pub normal: &'a [Vec3],
    pub depth_gs: &'a [f64],
    pub normal_gs: &'a [Vec3],
    pub color_gs: &'a [Vec3],
    pub depth_ref: &'a [f64],
    pub normal_ref: &'a [Vec3],
    pub color_gt: &'a [Vec3],
    pub weight_hf: &'a [f64],
    pub mask: &'a [bool],
    /// Tangent scales of every spawned surfel.
    pub scales: &'a [[f64; 2]],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailLoss {
    pub value: f64,
    pub geo_gaussian: f64,
    pub geo_prior: f64,
    pub l1: f64,
    pub ssim: f64,
    pub scaling: f64,
    pub grad_depth: Vec<f64>,
    pub grad_normal: Vec<Vec3>,
    pub grad_color_gs: Vec<Vec3>,
    pub grad_scales: Vec<[f64; 2]>,
}

/// Fine-stage objective. High-frequency pixels (weight `W`) follow the
/// surfel maps, the rest follow the priors; the surfel maps act as fixed
/// targets. The photometric part compares `C_gs` with `C_gt`.
pub fn detail_loss(inp: &DetailInputs<'_>, weights: &LossWeights) -> Result<DetailLoss> {
    let n = inp.width * inp.height;
    if inp.color_gs.len() != n || inp.color_gt.len() != n || inp.weight_hf.len() != n {
        return Err(Error::ShapeMismatch(format!("detail loss rasters must hold {n} pixels")));
    }
    let low: Vec<f64> = inp.weight_hf.iter().map(|w| 1.0 - w).collect();
    let g1 = weighted_geometric_loss(inp.depth, inp.normal, inp.depth_gs, inp.normal_gs, inp.mask, Some(inp.weight_hf), weights.lambda_d)?;
    let g2 = weighted_geometric_loss(inp.depth, inp.normal, inp.depth_ref, inp.normal_ref, inp.mask, Some(&low), weights.lambda_d)?;

    let inv = 1.0 / (3 * n) as f64;
    let mut l1 = 0.0;
    let mut grad_color_gs = vec![Vec3::zeros(); n];
    let l1_weight = weights.lambda_rgb * (1.0 - weights.lambda_c);
    for i in 0..n {
        let d = inp.color_gs[i] - inp.color_gt[i];
        l1 += d.abs().sum();
        grad_color_gs[i] = d.map(sign) * (l1_weight * inv);
    }
    l1 *= inv;

    let s = ssim(inp.color_gt, inp.color_gs, inp.width, inp.height)?;
    for (g, sg) in grad_color_gs.iter_mut().zip(&s.grad_b) {
        *g -= sg * (weights.lambda_rgb * weights.lambda_c);
    }
    let (scaling, mut grad_scales) = scaling_volume_loss(inp.scales);
    let k = weights.lambda_rgb * weights.lambda_s;
    for g in &mut grad_scales {
        *g = [g[0] * k, g[1] * k];
    }

    let value = g1.value + g2.value + weights.lambda_rgb * ((1.0 - weights.lambda_c) * l1 + weights.lambda_c * (1.0 - s.value) + weights.lambda_s * scaling);
    let grad_depth = g1.grad_depth.iter().zip(&g2.grad_depth).map(|(a, b)| a + b).collect();
    let grad_normal = g1.grad_normal.iter().zip(&g2.grad_normal).map(|(a, b)| a + b).collect();
    Ok(DetailLoss { value, geo_gaussian: g1.value, geo_prior: g2.value, l1, ssim: s.value, scaling, grad_depth, grad_normal, grad_color_gs, grad_scales })
}

/// Converts camera-z depth to ray length for every pixel of `camera`.
pub fn z_to_ray_depth(z: &[f64], camera: &crate::camera::PinholeCamera) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    for py in 0..camera.height {
        for px in 0..camera.width {
            let i = py * camera.width + px;
            let dx = (px as f64 + 0.5 - camera.cx) / camera.fx;
            let dy = (py as f64 + 0.5 - camera.cy) / camera.fy;
            out.push(z[i] * (1.0 + dx * dx + dy * dy).sqrt());
        }
    }
    out
}

pub fn psnr(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>() / (3 * a.len()) as f64;
    -10.0 * mse.log10()
}
