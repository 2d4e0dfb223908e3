//! Nearest-neighbour queries over 3D points.

use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::geometry::Vec3;

type Entry = GeomWithData<[f64; 3], usize>;

pub struct PointIndex {
    tree: RTree<Entry>,
}

impl PointIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let entries = points.iter().enumerate().map(|(i, p)| Entry::new([p.x, p.y, p.z], i)).collect();
        Self { tree: RTree::bulk_load(entries) }
    }

    pub fn len(&self) -> usize {
        self.tree.size()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.size() == 0
    }

    /// Index and Euclidean distance of the closest point.
    pub fn nearest(&self, p: &Vec3) -> (usize, f64) {
        let (e, d2) = self.tree.nearest_neighbor_iter_with_distance_2(&[p.x, p.y, p.z]).next().expect("nearest on an empty index");
        (e.data, d2.sqrt())
    }

    /// The `k` closest points as `(index, distance)`, nearest first; ties
    /// are ordered by index.
    pub fn knn(&self, p: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self.tree.nearest_neighbor_iter_with_distance_2(&[p.x, p.y, p.z]).take(k).map(|(e, d2)| (e.data, d2.sqrt())).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Indices within `radius`, sorted.
    pub fn within(&self, p: &Vec3, radius: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self.tree.locate_within_distance([p.x, p.y, p.z], radius * radius).map(|e| e.data).collect();
        out.sort_unstable();
        out
    }
}
