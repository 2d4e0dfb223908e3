//! Geometric and photometric evaluation against synthetic ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::appearance::{render_appearance, spawn_soup};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::losses::{geometric_loss, psnr, SupervisionSet};
use crate::planar::{chamfer_distance, extract_lod_planes, sample_oriented_points, LoDSchedule};
use crate::render::{render, RenderSettings};
use crate::scene::{GroundTruth, SceneBundle};
use crate::soup::TriangleSoup;

/// Area-weighted uniform samples of the ground-truth mesh.
pub fn sample_ground_truth(gt: &GroundTruth, count: usize, seed: u64) -> Vec<Vec3> {
    let tris: Vec<[Vec3; 3]> = gt.faces.iter().map(|f| f.map(|i| gt.vertices[i as usize])).collect();
    sample_triangles(&tris, count, seed)
}

/// Area-weighted uniform samples of the soup surface.
pub fn sample_soup(soup: &TriangleSoup, count: usize, seed: u64) -> Vec<Vec3> {
    let tris: Vec<[Vec3; 3]> = soup.triangles.iter().filter(|t| !t.is_degenerate()).map(|t| t.vertices).collect();
    sample_triangles(&tris, count, seed)
}

fn sample_triangles(tris: &[[Vec3; 3]], count: usize, seed: u64) -> Vec<Vec3> {
    let mut cdf = Vec::with_capacity(tris.len());
    let mut acc = 0.0;
    for [a, b, c] in tris {
        acc += 0.5 * (b - a).cross(&(c - a)).norm();
        cdf.push(acc);
    }
    if tris.is_empty() || acc <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let f = cdf.partition_point(|c| *c < rng.random::<f64>() * acc).min(tris.len() - 1);
            let [a, b, c] = tris[f];
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}

/// Mean geometric loss over the given views.
pub fn mean_geometric_loss(bundle: &SceneBundle, soup: &TriangleSoup, supervision: &[SupervisionSet], views: &[usize], settings: &RenderSettings, lambda_d: f64) -> Result<f64> {
    let mut total = 0.0;
    for &v in views {
        let out = render(soup, &bundle.cameras[v], settings);
        let sup = &supervision[v];
        total += geometric_loss(&out.depth, &out.normal, &sup.depth, &sup.normal, &sup.mask(), lambda_d)?.value;
    }
    Ok(total / views.len().max(1) as f64)
}

/// Mean PSNR of the appearance surfels over the given views.
pub fn appearance_psnr(bundle: &SceneBundle, soup: &TriangleSoup, views: &[usize], settings: &RenderSettings) -> f64 {
    let gaussians = spawn_soup(soup);
    let sum: f64 = views.iter().map(|&v| psnr(&render_appearance(&gaussians, &bundle.cameras[v], settings).color, &bundle.views[v].color)).sum();
    sum / views.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LodReport {
    pub lod: u8,
    pub planes: usize,
    pub chamfer_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub triangles: usize,
    pub chamfer_soup_cm: f64,
    pub chamfer_soup_fraction_of_diagonal: f64,
    pub lods: Vec<LodReport>,
    pub heldout_psnr: Option<f64>,
    pub schedule: LoDSchedule,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("triangles {}\nchamfer_soup_cm {:.4}\nchamfer_soup_fraction {:.6}\n", self.triangles, self.chamfer_soup_cm, self.chamfer_soup_fraction_of_diagonal);
        for l in &self.lods {
            s += &format!("lod{} planes {} chamfer_cm {}\n", l.lod, l.planes, l.chamfer_cm.map_or("n/a".into(), |c| format!("{c:.4}")));
        }
        if let Some(p) = self.heldout_psnr {
            s += &format!("heldout_psnr {p:.3}\n");
        }
        for (i, p) in self.schedule.passes.iter().enumerate() {
            s += &format!("pass {i} epsilon {}%d min_inliers {} th_n {}\n", p.epsilon_fraction * 100.0, p.min_inliers, p.normal_threshold);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub gt_samples: usize,
    /// Sampling density for plane extraction, points per unit area.
    pub point_density: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { gt_samples: 50_000, point_density: 5_000.0, seed: 0 }
    }
}

/// Chamfer distances are reported in centimetres, taking scene units as metres.
pub fn evaluate(bundle: &SceneBundle, soup: &TriangleSoup, schedule: &LoDSchedule, opts: &EvalOptions) -> Result<EvalReport> {
    let gt = bundle.ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
    let gt_pts = sample_ground_truth(gt, opts.gt_samples, opts.seed);
    let soup_pts = sample_soup(soup, opts.gt_samples, opts.seed + 1);
    let chamfer = chamfer_distance(&gt_pts, &soup_pts)?;
    let points = sample_oriented_points(soup, opts.point_density, opts.seed + 2);
    let lods = match extract_lod_planes(&points, schedule) {
        Ok(l) => l
            .levels
            .iter()
            .enumerate()
            .map(|(i, prims)| {
                let samples: Vec<Vec3> = prims.iter().flat_map(|p| p.projected_inliers(&points)).collect();
                LodReport { lod: i as u8, planes: prims.len(), chamfer_cm: chamfer_distance(&gt_pts, &samples).ok().map(|c| c * 100.0) }
            })
            .collect(),
        Err(Error::EmptyCloud) => (0..3).map(|i| LodReport { lod: i, planes: 0, chamfer_cm: None }).collect(),
        Err(e) => return Err(e),
    };
    let test = bundle.test_indices();
    let settings = RenderSettings::for_scene(bundle.diagonal());
    let heldout_psnr = (!test.is_empty()).then(|| appearance_psnr(bundle, soup, &test, &settings));
    Ok(EvalReport {
        triangles: soup.len(),
        chamfer_soup_cm: chamfer * 100.0,
        chamfer_soup_fraction_of_diagonal: chamfer / gt.diagonal(),
        lods,
        heldout_psnr,
        schedule: schedule.clone(),
    })
}
