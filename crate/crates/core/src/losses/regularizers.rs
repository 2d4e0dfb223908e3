/// Mean binary entropy of opacities; returns the value and `dL/dalpha`.
pub fn opacity_entropy_loss(alpha: &[f64]) -> (f64, Vec<f64>) {
    if alpha.is_empty() {
        return (0.0, Vec::new());
    }
    let inv = 1.0 / alpha.len() as f64;
    let h = |a: f64| {
        let t = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
        t(a) + t(1.0 - a)
    };
    let value = alpha.iter().map(|a| h(*a)).sum::<f64>() * inv;
    let grad = alpha.iter().map(|a| inv * ((1.0 - a) / a).ln()).collect();
    (value, grad)
}

/// Mean tangent-plane area proxy `s_u s_v`; returns the value and per-surfel
/// gradients.
pub fn scaling_volume_loss(scales: &[[f64; 2]]) -> (f64, Vec<[f64; 2]>) {
    if scales.is_empty() {
        return (0.0, Vec::new());
    }
    let inv = 1.0 / scales.len() as f64;
    let value = scales.iter().map(|s| s[0] * s[1]).sum::<f64>() * inv;
    (value, scales.iter().map(|s| [s[1] * inv, s[0] * inv]).collect())
}
