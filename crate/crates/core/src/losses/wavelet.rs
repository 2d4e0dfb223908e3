use crate::geometry::Vec3;

/// Rec. 601 luma.
pub fn luminance(c: &Vec3) -> f64 {
    0.299 * c.x + 0.587 * c.y + 0.114 * c.z
}

/// High-frequency weight in `[0, 1]`: magnitude of the single-level Haar
/// detail bands of the luminance, upsampled by pixel replication and divided
/// by its 99th percentile (or the maximum when that is zero).
pub fn wavelet_weight_map(img: &[Vec3], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(img.len(), width * height, "image size mismatch");
    assert!(width >= 2 && height >= 2, "wavelet map needs at least 2x2 pixels");
    let luma = |x: usize, y: usize| luminance(&img[y.min(height - 1) * width + x.min(width - 1)]);
    let (bw, bh) = (width.div_ceil(2), height.div_ceil(2));
    let mut detail = vec![0.0; bw * bh];
    for by in 0..bh {
        for bx in 0..bw {
            let (x, y) = (2 * bx, 2 * by);
            let (a, b, c, d) = (luma(x, y), luma(x + 1, y), luma(x, y + 1), luma(x + 1, y + 1));
            let lh = (a - b + c - d) * 0.5;
            let hl = (a + b - c - d) * 0.5;
            let hh = (a - b - c + d) * 0.5;
            detail[by * bw + bx] = (lh * lh + hl * hl + hh * hh).sqrt();
        }
    }
    let mut sorted = detail.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((sorted.len() - 1) as f64 * 0.99).round() as usize;
    let mut scale = sorted[rank];
    if scale <= 0.0 {
        scale = sorted[sorted.len() - 1];
    }
    let mut out = vec![0.0; width * height];
    if scale <= 0.0 {
        return out;
    }
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = (detail[(y / 2) * bw + x / 2] / scale).clamp(0.0, 1.0);
        }
    }
    out
}
