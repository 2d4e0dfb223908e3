use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricLoss {
    pub value: f64,
    pub grad_depth: Vec<f64>,
    pub grad_normal: Vec<Vec3>,
}

/// L1 subgradient with `sign(0) = 0`.
#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean over valid pixels of `lambda_d |D - D_ref| + |N - N_ref|_1 + |1 - N . N_ref|`.
pub fn geometric_loss(depth: &[f64], normal: &[Vec3], depth_ref: &[f64], normal_ref: &[Vec3], mask: &[bool], lambda_d: f64) -> Result<GeometricLoss> {
    weighted_geometric_loss(depth, normal, depth_ref, normal_ref, mask, None, lambda_d)
}

/// [`geometric_loss`] with each pixel's term scaled by `weight`; the mean is
/// still taken over the masked pixel count.
pub fn weighted_geometric_loss(
    depth: &[f64],
    normal: &[Vec3],
    depth_ref: &[f64],
    normal_ref: &[Vec3],
    mask: &[bool],
    weight: Option<&[f64]>,
    lambda_d: f64,
) -> Result<GeometricLoss> {
    let n = depth.len();
    let lens = [normal.len(), depth_ref.len(), normal_ref.len(), mask.len(), weight.map_or(n, <[f64]>::len)];
    if lens.iter().any(|l| *l != n) {
        return Err(Error::ShapeMismatch(format!("geometric loss inputs {n} vs {lens:?}")));
    }
    let count = mask.iter().filter(|m| **m).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let inv = 1.0 / count as f64;
    let mut value = 0.0;
    let mut grad_depth = vec![0.0; n];
    let mut grad_normal = vec![Vec3::zeros(); n];
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        let w = weight.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let dd = depth[i] - depth_ref[i];
        let dn = normal[i] - normal_ref[i];
        let cos = normal[i].dot(&normal_ref[i]);
        value += w * (lambda_d * dd.abs() + dn.abs().sum() + (1.0 - cos).abs());
        grad_depth[i] = w * inv * lambda_d * sign(dd);
        grad_normal[i] = (dn.map(sign) - normal_ref[i] * sign(1.0 - cos)) * (w * inv);
    }
    Ok(GeometricLoss { value: value * inv, grad_depth, grad_normal })
}
