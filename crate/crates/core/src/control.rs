//! Adaptive density control: field-gradient splitting, contribution pruning
//! and visibility-vote normal orientation.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::appearance::SurfelGaussian;
use crate::camera::PinholeCamera;
use crate::error::{Error, Result};
use crate::geometry::{bisect_edge, LocalFrame, Vec3, EDGE_ORDER};
use crate::render::RenderTarget;
use crate::soup::TriangleSoup;
use crate::spatial::PointIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityConfig {
    pub grad_threshold: f64,
    pub prune_alpha: f64,
    pub prune_gamma: f64,
    pub prune_interval: usize,
    /// Final fine iterations that carry the opacity entropy loss.
    pub entropy_window: usize,
    pub split_interval: usize,
    /// Normal-direction spread of each surfel relative to its mean scale.
    pub normal_spread: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            grad_threshold: 1e-5,
            prune_alpha: 0.5,
            prune_gamma: 2.0,
            prune_interval: 2000,
            entropy_window: 5000,
            split_interval: 500,
            normal_spread: 0.01,
        }
    }
}

/// Field contributions beyond this many standard deviations are dropped.
pub const FIELD_CUTOFF_SIGMAS: f64 = 10.0;

/// Unnormalized Gaussian density sum of the surfels, each thickened along
/// its normal.
pub struct GaussianField {
    gaussians: Vec<SurfelGaussian>,
    spread: f64,
    index: Option<PointIndex>,
    radius: f64,
}

impl GaussianField {
    pub fn new(gaussians: Vec<SurfelGaussian>, normal_spread: f64) -> Self {
        let centers: Vec<Vec3> = gaussians.iter().map(|g| g.center).collect();
        let max_scale = gaussians.iter().map(|g| g.scales[0].max(g.scales[1])).fold(0.0, f64::max);
        let index = (!centers.is_empty()).then(|| PointIndex::new(&centers));
        Self { gaussians, spread: normal_spread, index, radius: FIELD_CUTOFF_SIGMAS * max_scale }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), DensityConfig::default().normal_spread)
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn gaussians(&self) -> &[SurfelGaussian] {
        &self.gaussians
    }

    fn term(&self, g: &SurfelGaussian, p: &Vec3) -> (f64, Vec3) {
        let d = p - g.center;
        let eps = self.spread * 0.5 * (g.scales[0] + g.scales[1]);
        let (du, dv, dn) = (g.t_u.dot(&d), g.t_v.dot(&d), g.n.dot(&d));
        let (iu, iv, inn) = (1.0 / (g.scales[0] * g.scales[0]), 1.0 / (g.scales[1] * g.scales[1]), 1.0 / (eps * eps));
        let q = du * du * iu + dv * dv * iv + dn * dn * inn;
        let f = g.opacity * (-0.5 * q).exp();
        let sinv_d = g.t_u * (du * iu) + g.t_v * (dv * iv) + g.n * (dn * inn);
        (f, -sinv_d * f)
    }

    fn nearby(&self, p: &Vec3) -> Vec<usize> {
        match &self.index {
            Some(idx) => idx.within(p, self.radius),
            None => Vec::new(),
        }
    }

    pub fn value(&self, p: &Vec3) -> f64 {
        self.nearby(p).into_iter().map(|i| self.term(&self.gaussians[i], p).0).sum()
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        self.nearby(p).into_iter().fold(Vec3::zeros(), |acc, i| acc + self.term(&self.gaussians[i], p).1)
    }
}

pub fn field_gradient(field: &GaussianField, p: &Vec3) -> Vec3 {
    field.gradient(p)
}

/// Directional-derivative difference along the edge `q0 -> q1`.
pub fn edge_refinement_score(q0: &Vec3, q1: &Vec3, field: &GaussianField) -> Result<f64> {
    let e = q1 - q0;
    let len = e.norm();
    if !(len > 0.0) {
        return Err(Error::ZeroLengthEdge);
    }
    Ok((field.gradient(q1) - field.gradient(q0)).dot(&e) / len)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SplitReport {
    pub considered: usize,
    pub split: usize,
    /// `(parent id, child ids)` for every split.
    pub children: Vec<(u64, [u64; 2])>,
}

/// Bisects, per triangle, the longest edge whose score magnitude exceeds
/// the threshold. Children replace the parent in place.
pub fn split_pass(soup: &TriangleSoup, field: &GaussianField, config: &DensityConfig) -> (TriangleSoup, SplitReport) {
    let choices: Vec<Option<usize>> = soup
        .triangles
        .par_iter()
        .map(|t| {
            let mut best: Option<(usize, f64)> = None;
            for (k, (i, j)) in EDGE_ORDER.iter().enumerate() {
                let (a, b) = (t.vertices[*i], t.vertices[*j]);
                let Ok(score) = edge_refinement_score(&a, &b, field) else { continue };
                if score.abs() > config.grad_threshold {
                    let len = (b - a).norm_squared();
                    if best.is_none_or(|(_, l)| len > l) {
                        best = Some((k, len));
                    }
                }
            }
            best.map(|(k, _)| k)
        })
        .collect();

    let mut out = TriangleSoup { triangles: Vec::with_capacity(soup.len()), next_id: soup.next_id };
    let mut report = SplitReport { considered: soup.len(), ..Default::default() };
    for (tri, choice) in soup.triangles.iter().zip(choices) {
        let split = choice.and_then(|k| {
            let (i, j) = EDGE_ORDER[k];
            bisect_edge(tri, i, j).ok()
        });
        let Some((mut a, mut b)) = split else {
            out.triangles.push(tri.clone());
            continue;
        };
        if let Ok(pf) = LocalFrame::from_vertices(&tri.vertices) {
            for child in [&mut a, &mut b] {
                if let Ok(cf) = LocalFrame::from_vertices(&child.vertices) {
                    child.appearance = tri.appearance.recentered(&pf, &cf);
                }
            }
        }
        let ids = [out.allocate_id(), out.allocate_id()];
        a.id = ids[0];
        b.id = ids[1];
        out.triangles.push(a);
        out.triangles.push(b);
        report.split += 1;
        report.children.push((tri.id, ids));
    }
    (out, report)
}

/// Per-triangle contribution `gamma` and visible-view count `M`, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContributionStats {
    pub entries: BTreeMap<u64, (f64, u32)>,
}

impl ContributionStats {
    /// Adds one rendered view.
    pub fn record(&mut self, soup: &TriangleSoup, target: &RenderTarget) {
        for (k, tri) in soup.triangles.iter().enumerate() {
            if target.visible[k] {
                let e = self.entries.entry(tri.id).or_insert((0.0, 0));
                e.0 += target.contribution[k];
                e.1 += 1;
            }
        }
    }

    /// Mean per-view summed contribution over the views that saw the triangle.
    pub fn gamma(&self, id: u64) -> f64 {
        match self.entries.get(&id) {
            Some((sum, m)) if *m > 0 => sum / *m as f64,
            _ => 0.0,
        }
    }

    pub fn views(&self, id: u64) -> u32 {
        self.entries.get(&id).map_or(0, |e| e.1)
    }

    /// Carries a split parent's record to its children, each taking half the
    /// summed contribution.
    pub fn inherit(&mut self, children: &[(u64, [u64; 2])]) {
        for (parent, kids) in children {
            if let Some((sum, m)) = self.entries.remove(parent) {
                for k in kids {
                    self.entries.insert(*k, (0.5 * sum, m));
                }
            }
        }
    }

    pub fn reset(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PruneReport {
    pub before: usize,
    pub removed_low: usize,
    pub removed_unseen: usize,
    pub after: usize,
}

/// Removes triangles with `alpha < prune_alpha` and `gamma < prune_gamma`,
/// and triangles never seen during the interval, then resets the stats.
pub fn prune_pass(soup: &TriangleSoup, stats: &mut ContributionStats, config: &DensityConfig) -> (TriangleSoup, PruneReport) {
    let mut report = PruneReport { before: soup.len(), ..Default::default() };
    let mut kept = Vec::with_capacity(soup.len());
    for tri in &soup.triangles {
        if stats.views(tri.id) == 0 {
            report.removed_unseen += 1;
        } else if tri.alpha() < config.prune_alpha && stats.gamma(tri.id) < config.prune_gamma {
            report.removed_low += 1;
        } else {
            kept.push(tri.clone());
        }
    }
    report.after = kept.len();
    stats.reset();
    (TriangleSoup { triangles: kept, next_id: soup.next_id }, report)
}

/// Camera ids that saw each triangle, keyed by triangle id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisibilityRecords {
    pub views: BTreeMap<u64, BTreeSet<u32>>,
}

impl VisibilityRecords {
    pub fn record(&mut self, soup: &TriangleSoup, camera_id: u32, target: &RenderTarget) {
        for (k, tri) in soup.triangles.iter().enumerate() {
            if target.visible[k] {
                self.views.entry(tri.id).or_default().insert(camera_id);
            }
        }
    }
}

/// Flips triangles that face fewer than half of the cameras that saw them.
/// Returns the oriented soup and the number of flips.
pub fn orient_normals(soup: &TriangleSoup, cameras: &[PinholeCamera], visibility: &VisibilityRecords) -> (TriangleSoup, usize) {
    let centers: BTreeMap<u32, Vec3> = cameras.iter().map(|c| (c.id, c.center())).collect();
    let mut out = soup.clone();
    let mut flipped = 0;
    for tri in &mut out.triangles {
        let Some(seen) = visibility.views.get(&tri.id) else { continue };
        let views: Vec<&Vec3> = seen.iter().filter_map(|id| centers.get(id)).collect();
        if views.is_empty() {
            continue;
        }
        let (n, mu) = (tri.normal(), tri.barycenter());
        let facing = views.iter().filter(|c| n.dot(&(**c - mu)) > 0.0).count();
        if 2 * facing < views.len() {
            tri.flip();
            flipped += 1;
        }
    }
    (out, flipped)
}
