//! Oriented point sampling, multi-pass plane detection and Chamfer distance.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::soup::TriangleSoup;
use crate::spatial::PointIndex;

/// Neighbourhood size for seeding and growing.
pub const NEIGHBOURS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub position: Vec3,
    pub normal: Vec3,
    pub source: u64,
}

/// Samples `Poisson(area * density)` points per triangle, uniform in
/// barycentric coordinates, each carrying the triangle's normal.
pub fn sample_oriented_points(soup: &TriangleSoup, density: f64, seed: u64) -> Vec<OrientedPoint> {
    assert!(density > 0.0, "density must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for tri in &soup.triangles {
        if tri.is_degenerate() {
            continue;
        }
        let count = match Poisson::new(tri.area() * density) {
            Ok(p) => p.sample(&mut rng) as usize,
            Err(_) => 0,
        };
        let [a, b, c] = tri.vertices;
        let n = tri.normal();
        for _ in 0..count {
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
            out.push(OrientedPoint { position: p, normal: n, source: tri.id });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarPrimitive {
    pub normal: [f64; 3],
    /// Plane `normal . x = offset`.
    pub offset: f64,
    pub inliers: Vec<usize>,
    pub lod: u8,
    pub pass: usize,
}

impl PlanarPrimitive {
    pub fn n(&self) -> Vec3 {
        Vec3::from(self.normal)
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        (self.n().dot(p) - self.offset).abs()
    }

    /// Inliers projected onto the plane.
    pub fn projected_inliers(&self, points: &[OrientedPoint]) -> Vec<Vec3> {
        let n = self.n();
        self.inliers.iter().map(|&i| points[i].position - n * (n.dot(&points[i].position) - self.offset)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassParams {
    /// Distance tolerance as a fraction of the cloud's bounding-box diagonal.
    pub epsilon_fraction: f64,
    pub min_inliers: usize,
    pub normal_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoDSchedule {
    pub passes: Vec<PassParams>,
    /// Number of passes making up LoD0, LoD1 and LoD2.
    pub lod_ends: [usize; 3],
}

impl Default for LoDSchedule {
    fn default() -> Self {
        let p = |e: f64, m: usize, t: f64| PassParams { epsilon_fraction: e, min_inliers: m, normal_threshold: t };
        Self {
            passes: vec![
                p(0.015, 4000, 0.85),
                p(0.002, 500, 0.85),
                p(0.0005, 200, 0.85),
                p(0.0005, 100, 0.8),
                p(0.0005, 80, 0.8),
                p(0.0005, 30, 0.8),
                p(0.0005, 20, 0.75),
                p(0.0005, 10, 0.75),
                p(0.0005, 5, 0.7),
                p(0.0005, 4, 0.5),
            ],
            lod_ends: [3, 6, 10],
        }
    }
}

impl LoDSchedule {
    pub fn lod_of_pass(&self, pass: usize) -> u8 {
        self.lod_ends.iter().position(|end| pass < *end).unwrap_or(2) as u8
    }
}

#[derive(Clone, Default)]
struct Moments {
    n: f64,
    sum: Vec3,
    outer: Matrix3<f64>,
}

impl Moments {
    fn add(&mut self, p: &Vec3) {
        self.n += 1.0;
        self.sum += p;
        self.outer += p * p.transpose();
    }

    /// Least-squares plane through the accumulated points: `(normal,
    /// centroid, variance along the normal)`.
    fn plane(&self) -> Option<(Vec3, Vec3, f64)> {
        if self.n < 3.0 {
            return None;
        }
        let c = self.sum / self.n;
        let cov = self.outer / self.n - c * c.transpose();
        let eig = SymmetricEigen::new(cov);
        let k = eig.eigenvalues.imin();
        let n: Vec3 = eig.eigenvectors.column(k).into_owned();
        let norm = n.norm();
        (norm > 0.0 && n.iter().all(|v| v.is_finite())).then(|| (n / norm, c, eig.eigenvalues[k].max(0.0)))
    }
}

/// One greedy region-growing pass over `candidates` (indices into
/// `points`). Returns accepted primitives and the unassigned candidates.
pub fn detect_planes_pass(points: &[OrientedPoint], candidates: &[usize], epsilon: f64, min_inliers: usize, normal_threshold: f64) -> (Vec<PlanarPrimitive>, Vec<usize>) {
    assert!(epsilon > 0.0 && min_inliers > 0, "pass parameters must be positive");
    assert!(normal_threshold > 0.0 && normal_threshold <= 1.0, "normal threshold must lie in (0, 1]");
    let m = candidates.len();
    if m < min_inliers.max(3) {
        return (Vec::new(), candidates.to_vec());
    }
    let pos: Vec<Vec3> = candidates.iter().map(|&i| points[i].position).collect();
    let index = PointIndex::new(&pos);
    let k = NEIGHBOURS.min(m);
    let neighbours: Vec<Vec<usize>> = pos.par_iter().map(|p| index.knn(p, k).into_iter().map(|(j, _)| j).collect()).collect();
    let seed_fit: Vec<f64> = neighbours
        .par_iter()
        .map(|nb| {
            let mut mo = Moments::default();
            nb.iter().for_each(|&j| mo.add(&pos[j]));
            mo.plane().map_or(f64::INFINITY, |p| p.2)
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| seed_fit[*a].total_cmp(&seed_fit[*b]).then(a.cmp(b)));

    let mut assigned = vec![false; m];
    let mut seedable = vec![true; m];
    let mut in_region = vec![false; m];
    let mut primitives = Vec::new();
    for &seed in &order {
        if assigned[seed] || !seedable[seed] || !seed_fit[seed].is_finite() {
            continue;
        }
        let mut mo = Moments::default();
        neighbours[seed].iter().for_each(|&j| mo.add(&pos[j]));
        let Some((mut n, mut c, _)) = mo.plane() else { continue };

        let mut region = vec![seed];
        in_region[seed] = true;
        let mut grown = Moments::default();
        grown.add(&pos[seed]);
        let mut next_refit = 16;
        let mut head = 0;
        while head < region.len() {
            let cur = region[head];
            head += 1;
            for &j in &neighbours[cur] {
                if assigned[j] || in_region[j] {
                    continue;
                }
                let q = &pos[j];
                if (q - c).dot(&n).abs() < epsilon && points[candidates[j]].normal.dot(&n).abs() >= normal_threshold {
                    in_region[j] = true;
                    region.push(j);
                    grown.add(q);
                    if region.len() >= next_refit {
                        if let Some((nn, cc, _)) = grown.plane() {
                            n = if nn.dot(&n) < 0.0 { -nn } else { nn };
                            c = cc;
                        }
                        next_refit *= 2;
                    }
                }
            }
        }
        for &j in &region {
            in_region[j] = false;
        }

        // final plane from the whole region; members that violate it are released
        if let Some((nn, cc, _)) = grown.plane() {
            n = if nn.dot(&n) < 0.0 { -nn } else { nn };
            c = cc;
        }
        let kept: Vec<usize> = region
            .iter()
            .copied()
            .filter(|&j| (pos[j] - c).dot(&n).abs() < epsilon && points[candidates[j]].normal.dot(&n).abs() >= normal_threshold)
            .collect();
        if kept.len() >= min_inliers {
            for &j in &kept {
                assigned[j] = true;
            }
            let mut inliers: Vec<usize> = kept.iter().map(|&j| candidates[j]).collect();
            inliers.sort_unstable();
            primitives.push(PlanarPrimitive { normal: [n.x, n.y, n.z], offset: n.dot(&c), inliers, lod: 0, pass: 0 });
        } else {
            for &j in &region {
                seedable[j] = false;
            }
        }
    }
    let residual = (0..m).filter(|&j| !assigned[j]).map(|j| candidates[j]).collect();
    (primitives, residual)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LodPlanes {
    /// Cumulative primitive sets for LoD0, LoD1 and LoD2.
    pub levels: [Vec<PlanarPrimitive>; 3],
    pub residual: Vec<usize>,
    pub diagonal: f64,
}

pub fn bbox_diagonal(points: &[Vec3]) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    if points.is_empty() {
        0.0
    } else {
        (hi - lo).norm()
    }
}

/// Runs every pass of `schedule` on the residual of the previous one.
pub fn extract_lod_planes(points: &[OrientedPoint], schedule: &LoDSchedule) -> Result<LodPlanes> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let positions: Vec<Vec3> = points.iter().map(|p| p.position).collect();
    let d = bbox_diagonal(&positions);
    let mut residual: Vec<usize> = (0..points.len()).collect();
    let mut all = Vec::new();
    let mut levels: [Vec<PlanarPrimitive>; 3] = Default::default();
    for (pass, params) in schedule.passes.iter().enumerate() {
        let (found, rest) = detect_planes_pass(points, &residual, params.epsilon_fraction * d, params.min_inliers, params.normal_threshold);
        residual = rest;
        let lod = schedule.lod_of_pass(pass);
        all.extend(found.into_iter().map(|p| PlanarPrimitive { lod, pass, ..p }));
        for (l, end) in schedule.lod_ends.iter().enumerate() {
            if pass + 1 == *end {
                levels[l] = all.clone();
            }
        }
    }
    Ok(LodPlanes { levels, residual, diagonal: d })
}

/// Symmetric mean nearest-neighbour distance.
pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let one_way = |from: &[Vec3], to: &[Vec3]| {
        let index = PointIndex::new(to);
        from.par_iter().map(|p| index.nearest(p).1).sum::<f64>() / from.len() as f64
    };
    Ok(0.5 * (one_way(a, b) + one_way(b, a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chamfer_basics() {
        let a = vec![Vec3::zeros()];
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer_distance(&a, &[Vec3::x()]).unwrap(), 1.0);
        assert!(matches!(chamfer_distance(&a, &[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn schedule_matches_table() {
        let s = LoDSchedule::default();
        assert_eq!(s.passes.len(), 10);
        assert_eq!(s.passes[0], PassParams { epsilon_fraction: 0.015, min_inliers: 4000, normal_threshold: 0.85 });
        assert_eq!(s.passes[9], PassParams { epsilon_fraction: 0.0005, min_inliers: 4, normal_threshold: 0.5 });
        assert_eq!((s.lod_of_pass(2), s.lod_of_pass(3), s.lod_of_pass(9)), (0, 1, 2));
    }

    #[test]
    fn too_few_points_yield_nothing() {
        let pts: Vec<OrientedPoint> = (0..50).map(|i| OrientedPoint { position: Vec3::new(i as f64, (i * 7 % 5) as f64, 0.0), normal: Vec3::z(), source: 0 }).collect();
        let all: Vec<usize> = (0..50).collect();
        let (found, rest) = detect_planes_pass(&pts, &all, 0.01, 100, 0.8);
        assert!(found.is_empty());
        assert_eq!(rest, all);
    }
}
