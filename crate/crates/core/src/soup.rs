use std::collections::HashMap;

use crate::geometry::TrianglePrimitive;

/// Unstructured set of triangles with a monotone id allocator.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleSoup {
    pub triangles: Vec<TrianglePrimitive>,
    pub next_id: u64,
}

impl TriangleSoup {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a soup from triangles whose ids are already unique.
    pub fn from_triangles(triangles: Vec<TrianglePrimitive>) -> Self {
        let next_id = triangles.iter().map(|t| t.id + 1).max().unwrap_or(0);
        Self { triangles, next_id }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Appends `tri` under a freshly allocated id and returns that id.
    pub fn push(&mut self, mut tri: TrianglePrimitive) -> u64 {
        let id = self.allocate_id();
        tri.id = id;
        self.triangles.push(tri);
        id
    }

    pub fn index_by_id(&self) -> HashMap<u64, usize> {
        self.triangles.iter().enumerate().map(|(i, t)| (t.id, i)).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TrianglePrimitive> {
        self.triangles.iter()
    }
}
