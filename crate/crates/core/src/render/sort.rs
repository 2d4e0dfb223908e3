//! Tile binning with a `(tile, depth)` radix sort.

use std::ops::Range;

/// Order-preserving 32-bit encoding of a depth value: positive floats keep
/// their IEEE order, negative ones are reflected below them.
pub fn depth_key(depth: f64) -> u32 {
    let bits = (depth as f32).to_bits();
    if bits & 0x8000_0000 != 0 {
        !bits
    } else {
        bits | 0x8000_0000
    }
}

/// One sortable footprint: a sub-triangle (or surfel) with its view depth
/// and the pixel rectangle `[x0, x1) x [y0, y1)` it may touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortItem {
    pub splat: u32,
    pub sub: u32,
    pub depth: f64,
    pub rect: [usize; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinEntry {
    pub splat: u32,
    pub sub: u32,
    pub key: u64,
}

/// Per-tile depth-ordered splat lists.
#[derive(Debug, Clone)]
pub struct TileBins {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub width: usize,
    pub height: usize,
    pub entries: Vec<BinEntry>,
    pub ranges: Vec<Range<usize>>,
}

impl TileBins {
    pub fn tile_count(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    pub fn tile(&self, t: usize) -> &[BinEntry] {
        &self.entries[self.ranges[t].clone()]
    }

    /// Pixel bounds `[x0, x1) x [y0, y1)` of tile `t`.
    pub fn tile_bounds(&self, t: usize) -> [usize; 4] {
        let tx = t % self.tiles_x;
        let ty = t / self.tiles_x;
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        [x0, (x0 + self.tile_size).min(self.width), y0, (y0 + self.tile_size).min(self.height)]
    }
}

/// Duplicates each item into every tile it overlaps and sorts by
/// `(tile id, depth key)`. Items must be supplied in `(id, sub)` order; the
/// sort is stable, so that order breaks depth ties.
pub fn bin_items(items: &[SortItem], width: usize, height: usize, tile_size: usize) -> TileBins {
    assert!(tile_size >= 1, "tile_size must be at least 1");
    let tiles_x = width.div_ceil(tile_size).max(1);
    let tiles_y = height.div_ceil(tile_size).max(1);
    let mut entries = Vec::new();
    for item in items {
        let [x0, x1, y0, y1] = item.rect;
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let (tx0, tx1) = (x0 / tile_size, (x1 - 1) / tile_size);
        let (ty0, ty1) = (y0 / tile_size, (y1 - 1) / tile_size);
        let dk = depth_key(item.depth) as u64;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                let tile = (ty * tiles_x + tx) as u64;
                entries.push(BinEntry { splat: item.splat, sub: item.sub, key: (tile << 32) | dk });
            }
        }
    }
    radix_sort(&mut entries);

    let tile_count = tiles_x * tiles_y;
    let mut ranges = vec![0..0; tile_count];
    let mut start = 0;
    while start < entries.len() {
        let tile = (entries[start].key >> 32) as usize;
        let mut end = start;
        while end < entries.len() && (entries[end].key >> 32) as usize == tile {
            end += 1;
        }
        ranges[tile] = start..end;
        start = end;
    }
    TileBins { tile_size, tiles_x, tiles_y, width, height, entries, ranges }
}

/// Stable LSD radix sort on the 64-bit key, one byte per pass; passes whose
/// byte is constant across all keys are skipped.
pub fn radix_sort(entries: &mut Vec<BinEntry>) {
    if entries.len() < 2 {
        return;
    }
    let mut scratch = vec![BinEntry { splat: 0, sub: 0, key: 0 }; entries.len()];
    let (mut all_or, mut all_and) = (0u64, u64::MAX);
    for e in entries.iter() {
        all_or |= e.key;
        all_and &= e.key;
    }
    let varying = all_or ^ all_and;
    for pass in 0..8 {
        let shift = pass * 8;
        if (varying >> shift) & 0xff == 0 {
            continue;
        }
        let mut counts = [0usize; 256];
        for e in entries.iter() {
            counts[((e.key >> shift) & 0xff) as usize] += 1;
        }
        let mut offset = 0;
        for c in counts.iter_mut() {
            let n = *c;
            *c = offset;
            offset += n;
        }
        for e in entries.iter() {
            let b = ((e.key >> shift) & 0xff) as usize;
            scratch[counts[b]] = *e;
            counts[b] += 1;
        }
        std::mem::swap(entries, &mut scratch);
    }
}
