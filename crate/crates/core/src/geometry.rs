//! Triangle mathematics: tangent frames, local coordinates, edge functions
//! and midpoint subdivision.
//!
//! Every triangle carries a right-handed tangent frame anchored at its
//! barycenter. `t_u` points at `p0`, the normal follows the winding
//! `(p1 - p0) x (p2 - p0)`, and `t_v = n x t_u`. In that frame the three
//! vertices always sit at `(1, 0)`, `(a_hat, 1)` and `(-1 - a_hat, -1)`.

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::appearance::AppearanceAttachment;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Minimum `|(p1 - p0) x (p2 - p0)|` for a triangle to count as non-degenerate.
pub const DEFAULT_AREA_EPS: f64 = 1e-12;
/// Minimum tangent scale `s_v`.
pub const DEFAULT_SCALE_EPS: f64 = 1e-9;
/// Default recursion cap for [`subdivide_for_sorting`].
pub const DEFAULT_SUBDIVISION_DEPTH: u32 = 8;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A learnable triangle: three free vertices plus kernel parameters stored
/// in unconstrained form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrianglePrimitive {
    pub vertices: [Vec3; 3],
    pub opacity_logit: f64,
    pub sharpness_log: f64,
    pub smoothness_log: f64,
    pub appearance: AppearanceAttachment,
    pub id: u64,
    pub parent_id: Option<u64>,
}

impl TrianglePrimitive {
    pub fn new(id: u64, vertices: [Vec3; 3], alpha: f64, sharpness: f64, smoothness: f64) -> Self {
        Self {
            vertices,
            opacity_logit: logit(alpha),
            sharpness_log: sharpness.ln(),
            smoothness_log: smoothness.ln(),
            appearance: AppearanceAttachment::default(),
            id,
            parent_id: None,
        }
    }

    pub fn alpha(&self) -> f64 {
        logistic(self.opacity_logit)
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness_log.exp()
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness_log.exp()
    }

    pub fn barycenter(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    /// Unnormalized winding normal `(p1 - p0) x (p2 - p0)`.
    pub fn cross(&self) -> Vec3 {
        triangle_cross(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.cross().norm()
    }

    /// Unit normal; zero for degenerate triangles.
    pub fn normal(&self) -> Vec3 {
        let c = self.cross();
        let n = c.norm();
        if n > 0.0 {
            c / n
        } else {
            Vec3::zeros()
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.cross().norm() <= DEFAULT_AREA_EPS
    }

    /// Reverses the winding by swapping `p1` and `p2`.
    pub fn flip(&mut self) {
        self.vertices.swap(1, 2);
    }

    pub fn is_finite(&self) -> bool {
        self.vertices.iter().all(|v| v.iter().all(|c| c.is_finite()))
            && self.opacity_logit.is_finite()
            && self.sharpness_log.is_finite()
            && self.smoothness_log.is_finite()
    }
}

pub fn triangle_cross(v: &[Vec3; 3]) -> Vec3 {
    (v[1] - v[0]).cross(&(v[2] - v[0]))
}

pub fn triangle_area(v: &[Vec3; 3]) -> f64 {
    0.5 * triangle_cross(v).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub mu: Vec3,
    pub t_u: Vec3,
    pub t_v: Vec3,
    pub n: Vec3,
    pub s_u: f64,
    pub s_v: f64,
}

impl LocalFrame {
    pub fn from_vertices(v: &[Vec3; 3]) -> Result<Self> {
        Self::from_vertices_with(v, DEFAULT_AREA_EPS, DEFAULT_SCALE_EPS)
    }

    pub fn from_vertices_with(v: &[Vec3; 3], area_eps: f64, scale_eps: f64) -> Result<Self> {
        let c = triangle_cross(v);
        let c_norm = c.norm();
        if !(c_norm > area_eps) {
            return Err(Error::DegenerateTriangle(format!("cross-product norm {c_norm:e}")));
        }
        let n = c / c_norm;
        let mu = (v[0] + v[1] + v[2]) / 3.0;
        let e = v[0] - mu;
        let s_u = e.norm();
        if !(s_u > scale_eps) {
            return Err(Error::DegenerateTriangle(format!("s_u {s_u:e}")));
        }
        let t_u = e / s_u;
        let t_v = n.cross(&t_u);
        let s_v = t_v.dot(&(v[1] - mu)).abs();
        if !(s_v > scale_eps) {
            return Err(Error::DegenerateTriangle(format!("s_v {s_v:e}")));
        }
        Ok(Self { mu, t_u, t_v, n, s_u, s_v })
    }

    /// World position of the local point `(u, v)`.
    pub fn to_world(&self, u: f64, v: f64) -> Vec3 {
        self.mu + self.t_u * (u * self.s_u) + self.t_v * (v * self.s_v)
    }
}

pub fn local_frame(tri: &TrianglePrimitive) -> Result<LocalFrame> {
    LocalFrame::from_vertices(&tri.vertices)
}

/// Homogeneous local-to-world map: `(u, v, 0, 1) -> (world, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentTransform {
    pub matrix: Matrix4<f64>,
}

impl TangentTransform {
    pub fn apply(&self, u: f64, v: f64) -> Vector4<f64> {
        self.matrix * Vector4::new(u, v, 0.0, 1.0)
    }
}

pub fn tangent_transform(frame: &LocalFrame) -> TangentTransform {
    let a = frame.t_u * frame.s_u;
    let b = frame.t_v * frame.s_v;
    let mu = frame.mu;
    #[rustfmt::skip]
    let matrix = Matrix4::new(
        a.x, b.x, 0.0, mu.x,
        a.y, b.y, 0.0, mu.y,
        a.z, b.z, 0.0, mu.z,
        0.0, 0.0, 0.0, 1.0,
    );
    TangentTransform { matrix }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVertexCoords {
    pub a_hat: f64,
    pub coords: [[f64; 2]; 3],
}

/// Normalized projection of `p1` onto `t_u`.
pub fn a_hat(vertices: &[Vec3; 3], frame: &LocalFrame) -> f64 {
    frame.t_u.dot(&(vertices[1] - frame.mu)) / frame.s_u
}

pub fn local_vertex_coords(tri: &TrianglePrimitive, frame: &LocalFrame) -> LocalVertexCoords {
    let a = a_hat(&tri.vertices, frame);
    LocalVertexCoords { a_hat: a, coords: [[1.0, 0.0], [a, 1.0], [-1.0 - a, -1.0]] }
}

/// Signed affine edge values. `d0` vanishes on edge p0-p1, `d1` on p1-p2 and
/// `d2` on p2-p0; all three equal -1 at the barycenter.
pub fn edge_functions(x: [f64; 2], a_hat: f64) -> [f64; 3] {
    let [u, v] = x;
    [
        u + (1.0 - a_hat) * v - 1.0,
        -2.0 * u + (2.0 * a_hat + 1.0) * v - 1.0,
        u + (-2.0 - a_hat) * v - 1.0,
    ]
}

/// Partial derivatives of the three edge functions with respect to
/// `(u, v, a_hat)`.
pub fn edge_function_jacobian(x: [f64; 2], a_hat: f64) -> [[f64; 3]; 3] {
    let v = x[1];
    [[1.0, 1.0 - a_hat, -v], [-2.0, 2.0 * a_hat + 1.0, 2.0 * v], [1.0, -2.0 - a_hat, -v]]
}

/// Edges in tie-break order: vertex-index pairs sorted lexicographically.
pub const EDGE_ORDER: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Index (into [`EDGE_ORDER`]) of the longest edge; ties go to the lowest pair.
pub fn longest_edge(v: &[Vec3; 3]) -> usize {
    let mut best = 0;
    let mut best_len = f64::NEG_INFINITY;
    for (k, (i, j)) in EDGE_ORDER.iter().enumerate() {
        let len = (v[*i] - v[*j]).norm_squared();
        if len > best_len {
            best = k;
            best_len = len;
        }
    }
    best
}

/// Bisects edge `(i, j)` at its midpoint. Both children keep the parent's
/// winding, kernel parameters and appearance; their `id` is the parent's
/// and `parent_id` points at it, so the owning soup must re-id them.
pub fn bisect_edge(tri: &TrianglePrimitive, i: usize, j: usize) -> Result<(TrianglePrimitive, TrianglePrimitive)> {
    if tri.is_degenerate() {
        return Err(Error::DegenerateTriangle(format!("triangle {}", tri.id)));
    }
    assert!(i < 3 && j < 3 && i != j, "invalid edge ({i}, {j})");
    // orient the edge along the winding so children stay counterclockwise
    let (a, b) = if (i + 1) % 3 == j { (i, j) } else { (j, i) };
    let k = 3 - a - b;
    let v = &tri.vertices;
    let m = (v[a] + v[b]) * 0.5;
    let mut first = tri.clone();
    let mut second = tri.clone();
    first.vertices = [v[a], m, v[k]];
    second.vertices = [m, v[b], v[k]];
    first.parent_id = Some(tri.id);
    second.parent_id = Some(tri.id);
    Ok((first, second))
}

pub fn bisect_longest_edge(tri: &TrianglePrimitive) -> Result<(TrianglePrimitive, TrianglePrimitive)> {
    let (i, j) = EDGE_ORDER[longest_edge(&tri.vertices)];
    bisect_edge(tri, i, j)
}

/// Piece of a triangle produced by [`subdivide_for_sorting`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubTriangle {
    pub vertices: [Vec3; 3],
    pub parent_id: u64,
    pub index: u32,
}

impl SubTriangle {
    pub fn barycenter(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]) / 3.0
    }

    pub fn max_edge(&self) -> f64 {
        max_edge(&self.vertices)
    }
}

pub fn max_edge(v: &[Vec3; 3]) -> f64 {
    let a = (v[1] - v[0]).norm();
    let b = (v[2] - v[1]).norm();
    let c = (v[0] - v[2]).norm();
    a.max(b).max(c)
}

/// Recursive 4-way midpoint subdivision until every edge is shorter than
/// `edge_threshold`. Each level halves every edge, so all leaves share one
/// depth. Exceeding `max_depth` returns the subdivision at the cap inside
/// [`Error::SubdivisionBudgetExceeded`].
pub fn subdivide_for_sorting(tri: &TrianglePrimitive, edge_threshold: f64, max_depth: u32) -> Result<Vec<SubTriangle>> {
    subdivide_vertices(&tri.vertices, tri.id, edge_threshold, max_depth)
}

pub fn subdivide_vertices(v: &[Vec3; 3], parent_id: u64, edge_threshold: f64, max_depth: u32) -> Result<Vec<SubTriangle>> {
    assert!(edge_threshold > 0.0, "edge_threshold must be positive");
    let longest = max_edge(v);
    let mut depth = 0u32;
    let mut len = longest;
    while len >= edge_threshold && depth <= max_depth {
        len *= 0.5;
        depth += 1;
    }
    let over_budget = depth > max_depth;
    let depth = depth.min(max_depth);

    let mut level = vec![*v];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * 4);
        for t in &level {
            let m01 = (t[0] + t[1]) * 0.5;
            let m12 = (t[1] + t[2]) * 0.5;
            let m20 = (t[2] + t[0]) * 0.5;
            next.push([t[0], m01, m20]);
            next.push([m01, t[1], m12]);
            next.push([m20, m12, t[2]]);
            next.push([m12, m20, m01]);
        }
        level = next;
    }
    let subs: Vec<SubTriangle> = level
        .into_iter()
        .enumerate()
        .map(|(index, vertices)| SubTriangle { vertices, parent_id, index: index as u32 })
        .collect();
    if over_budget {
        return Err(Error::SubdivisionBudgetExceeded { depth: max_depth, partial: subs });
    }
    Ok(subs)
}
