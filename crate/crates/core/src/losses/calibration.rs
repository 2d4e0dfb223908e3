//! Scale and shift fitting of monocular depth against sparse metric depths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CalibrationModel {
    pub scale: f64,
    pub shift: f64,
    pub inlier_count: usize,
}

impl CalibrationModel {
    pub fn apply(&self, mono: f64) -> f64 {
        self.scale * mono + self.shift
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub confidence: f64,
    /// Inlier band as a fraction of the median target depth.
    pub threshold_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { max_iterations: 1000, confidence: 0.999, threshold_fraction: 0.02, seed: 0 }
    }
}

fn least_squares(m: &[f64], z: &[f64], idx: &[usize]) -> Option<(f64, f64)> {
    let n = idx.len() as f64;
    let (mut sm, mut sz, mut smm, mut smz) = (0.0, 0.0, 0.0, 0.0);
    for &i in idx {
        sm += m[i];
        sz += z[i];
    }
    let (mm, mz) = (sm / n, sz / n);
    for &i in idx {
        smm += (m[i] - mm) * (m[i] - mm);
        smz += (m[i] - mm) * (z[i] - mz);
    }
    if !(smm > 0.0) {
        return None;
    }
    let s = smz / smm;
    Some((s, mz - s * mm))
}

pub fn calibrate_depth_ransac(mono: &[f64], metric: &[f64]) -> Result<CalibrationModel> {
    calibrate_depth_ransac_with(mono, metric, &RansacConfig::default())
}

/// Two-point RANSAC for `z = s m + t` with a least-squares refit on the
/// best consensus set.
pub fn calibrate_depth_ransac_with(mono: &[f64], metric: &[f64], config: &RansacConfig) -> Result<CalibrationModel> {
    if mono.len() != metric.len() {
        return Err(Error::ShapeMismatch(format!("{} mono samples vs {} metric", mono.len(), metric.len())));
    }
    let n = mono.len();
    if n < 2 {
        return Err(Error::InsufficientPoints(n));
    }
    let first = mono[0];
    if mono.iter().all(|m| *m == first) {
        return Err(Error::DegenerateFit("all monocular samples are equal".into()));
    }
    let mut sorted = metric.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let threshold = config.threshold_fraction * median.abs();

    let inliers_of = |s: f64, t: f64| -> Vec<usize> { (0..n).filter(|&i| (metric[i] - (s * mono[i] + t)).abs() < threshold).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Vec<usize> = Vec::new();
    let mut needed = config.max_iterations;
    let mut iter = 0;
    while iter < needed.min(config.max_iterations) {
        iter += 1;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let dm = mono[j] - mono[i];
        if dm == 0.0 {
            continue;
        }
        let s = (metric[j] - metric[i]) / dm;
        let t = metric[i] - s * mono[i];
        let inl = inliers_of(s, t);
        if inl.len() > best.len() {
            best = inl;
            let w = best.len() as f64 / n as f64;
            let p_fail = 1.0 - w * w;
            needed = if p_fail <= 0.0 {
                iter
            } else {
                ((1.0 - config.confidence).ln() / p_fail.ln()).ceil().max(1.0) as usize
            };
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let pool = if best.len() >= 2 { &best } else { &all };
    let (s, t) = least_squares(mono, metric, pool).or_else(|| least_squares(mono, metric, &all)).ok_or_else(|| Error::DegenerateFit("consensus set has no spread".into()))?;
    // one refinement round on the refit model
    let refined = inliers_of(s, t);
    let (s, t) = if refined.len() >= best.len() && refined.len() >= 2 { least_squares(mono, metric, &refined).unwrap_or((s, t)) } else { (s, t) };
    Ok(CalibrationModel { scale: s, shift: t, inlier_count: inliers_of(s, t).len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data() {
        let m: Vec<f64> = (0..20).map(|i| 0.3 + i as f64 * 0.17).collect();
        let z: Vec<f64> = m.iter().map(|v| 2.0 * v + 0.5).collect();
        let c = calibrate_depth_ransac(&m, &z).unwrap();
        assert!((c.scale - 2.0).abs() < 1e-12);
        assert!((c.shift - 0.5).abs() < 1e-12);
        assert_eq!(c.inlier_count, 20);
    }

    #[test]
    fn single_point_is_insufficient() {
        assert!(matches!(calibrate_depth_ransac(&[1.0], &[2.0]), Err(Error::InsufficientPoints(1))));
    }

    #[test]
    fn constant_mono_is_degenerate() {
        assert!(matches!(calibrate_depth_ransac(&[1.0, 1.0, 1.0], &[2.0, 3.0, 4.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn scaling_targets_scales_model() {
        let m: Vec<f64> = (0..15).map(|i| 1.0 + i as f64 * 0.25).collect();
        let z: Vec<f64> = m.iter().map(|v| 1.5 * v - 0.2).collect();
        let base = calibrate_depth_ransac(&m, &z).unwrap();
        let z3: Vec<f64> = z.iter().map(|v| v * 3.0).collect();
        let scaled = calibrate_depth_ransac(&m, &z3).unwrap();
        assert!((scaled.scale - 3.0 * base.scale).abs() < 1e-12);
        assert!((scaled.shift - 3.0 * base.shift).abs() < 1e-12);
    }
}
