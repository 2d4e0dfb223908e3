use crate::geometry::{edge_function_jacobian, edge_functions, logistic};

/// Edge-preserving triangle kernel:
/// `w = alpha * logistic(-smoothness * ln sum_j exp(sharpness * d_j))`.
pub fn kernel_weight(x: [f64; 2], a_hat: f64, sharpness: f64, smoothness: f64, alpha: f64) -> f64 {
    let d = edge_functions(x, a_hat);
    let lse = log_sum_exp(d.map(|dj| sharpness * dj));
    alpha * logistic(-smoothness * lse)
}

fn log_sum_exp(z: [f64; 3]) -> f64 {
    let m = z[0].max(z[1]).max(z[2]);
    if m == f64::INFINITY {
        return m;
    }
    m + z.iter().map(|zj| (zj - m).exp()).sum::<f64>().ln()
}

/// Weight and its partial derivatives for the triangle kernel.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TriangleKernelGrad {
    pub w: f64,
    pub du: f64,
    pub dv: f64,
    pub da_hat: f64,
    pub dalpha: f64,
    pub dsharpness: f64,
    pub dsmoothness: f64,
}

pub(crate) fn triangle_kernel_grad(x: [f64; 2], a_hat: f64, sharpness: f64, smoothness: f64, alpha: f64) -> TriangleKernelGrad {
    let d = edge_functions(x, a_hat);
    let z = d.map(|dj| sharpness * dj);
    let m = z[0].max(z[1]).max(z[2]);
    let e = z.map(|zj| (zj - m).exp());
    let sum: f64 = e.iter().sum();
    let lse = m + sum.ln();
    let p = e.map(|ej| ej / sum);
    let s = logistic(-smoothness * lse);
    let w = alpha * s;
    // dw/dlse
    let dw_dlse = -alpha * s * (1.0 - s) * smoothness;
    let jac = edge_function_jacobian(x, a_hat);
    let mut dlse = [0.0; 3];
    for j in 0..3 {
        for k in 0..3 {
            dlse[k] += sharpness * p[j] * jac[j][k];
        }
    }
    let dlse_dsharp: f64 = (0..3).map(|j| p[j] * d[j]).sum();
    TriangleKernelGrad {
        w,
        du: dw_dlse * dlse[0],
        dv: dw_dlse * dlse[1],
        da_hat: dw_dlse * dlse[2],
        dalpha: s,
        dsharpness: dw_dlse * dlse_dsharp,
        dsmoothness: -alpha * s * (1.0 - s) * lse,
    }
}

/// Isotropic surfel kernel in tangent units.
pub fn gaussian_weight(x: [f64; 2], opacity: f64) -> f64 {
    opacity * (-(x[0] * x[0] + x[1] * x[1]) * 0.5).exp()
}
