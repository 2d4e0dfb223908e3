//! Binary soup checkpoints.
//!
//! Layout, little-endian: `HGS1`, version u32, triangle count u64, offsets
//! per triangle u32, next id u64, then f32 arrays (vertices, opacity_logit,
//! sharpness_log, smoothness_log, features, scaling, offsets, offset colours,
//! offset opacities, offset scales, offset rotations), then u64 ids and u64
//! parent ids (`u64::MAX` for none).

use std::path::Path;

use crate::appearance::{AppearanceAttachment, GaussianOffset, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::geometry::{TrianglePrimitive, Vec3};
use crate::soup::TriangleSoup;

pub const MAGIC: &[u8; 4] = b"HGS1";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 8 + 4 + 8;
const NO_PARENT: u64 = u64::MAX;

/// f32 values stored per triangle with `k` offsets.
pub fn floats_per_triangle(k: usize) -> usize {
    9 + 3 + FEATURE_DIM + 3 + 10 * k
}

pub fn encode_checkpoint(soup: &TriangleSoup) -> Result<Vec<u8>> {
    let k = soup.triangles.first().map_or(0, |t| t.appearance.offsets.len());
    if soup.triangles.iter().any(|t| t.appearance.offsets.len() != k) {
        return Err(Error::ShapeMismatch("all triangles must carry the same number of offsets".into()));
    }
    let n = soup.len();
    let mut out = Vec::with_capacity(HEADER + n * (floats_per_triangle(k) * 4 + 16));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&soup.next_id.to_le_bytes());
    let mut put = |vals: &mut dyn Iterator<Item = f64>| {
        for v in vals {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    let tris = &soup.triangles;
    let offs = || tris.iter().flat_map(|t| t.appearance.offsets.iter());
    put(&mut tris.iter().flat_map(|t| t.vertices.iter().flat_map(|v| [v.x, v.y, v.z])));
    put(&mut tris.iter().map(|t| t.opacity_logit));
    put(&mut tris.iter().map(|t| t.sharpness_log));
    put(&mut tris.iter().map(|t| t.smoothness_log));
    put(&mut tris.iter().flat_map(|t| t.appearance.feature));
    put(&mut tris.iter().flat_map(|t| { let s = t.appearance.scaling; [s.x, s.y, s.z] }));
    put(&mut offs().flat_map(|o| [o.offset.x, o.offset.y, o.offset.z]));
    put(&mut offs().flat_map(|o| [o.color.x, o.color.y, o.color.z]));
    put(&mut offs().map(|o| o.opacity_logit));
    put(&mut offs().flat_map(|o| o.scale_log));
    put(&mut offs().map(|o| o.rotation));
    for t in tris {
        out.extend_from_slice(&t.id.to_le_bytes());
    }
    for t in tris {
        out.extend_from_slice(&t.parent_id.unwrap_or(NO_PARENT).to_le_bytes());
    }
    Ok(out)
}

pub fn parse_checkpoint(bytes: &[u8], path: &Path) -> Result<TriangleSoup> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(Error::malformed(path, "missing HGS1 magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::malformed(path, format!("unsupported version {version}")));
    }
    let (n, k, next_id) = (u64_at(8), u32_at(16) as usize, u64_at(20));
    let per = (floats_per_triangle(k) as u64).checked_mul(4).and_then(|b| b.checked_add(16));
    let expected = per.and_then(|p| p.checked_mul(n)).and_then(|b| b.checked_add(HEADER as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::DimensionMismatch { path: path.into(), msg: format!("{} bytes do not hold {n} triangles with {k} offsets", bytes.len()) });
    }
    let n = n as usize;
    let mut pos = HEADER;
    let mut take = |count: usize| -> Vec<f64> {
        let v = bytes[pos..pos + 4 * count].chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        pos += 4 * count;
        v
    };
    let verts = take(9 * n);
    let opacity = take(n);
    let sharp = take(n);
    let smooth = take(n);
    let feats = take(FEATURE_DIM * n);
    let scaling = take(3 * n);
    let off_pos = take(3 * n * k);
    let off_col = take(3 * n * k);
    let off_op = take(n * k);
    let off_scale = take(2 * n * k);
    let off_rot = take(n * k);
    let ids_at = HEADER + 4 * floats_per_triangle(k) * n;
    let v3 = |s: &[f64], i: usize| Vec3::new(s[3 * i], s[3 * i + 1], s[3 * i + 2]);
    let mut triangles = Vec::with_capacity(n);
    for i in 0..n {
        let mut feature = [0.0; FEATURE_DIM];
        feature.copy_from_slice(&feats[FEATURE_DIM * i..FEATURE_DIM * (i + 1)]);
        let offsets = (0..k)
            .map(|j| {
                let o = i * k + j;
                GaussianOffset { offset: v3(&off_pos, o), color: v3(&off_col, o), opacity_logit: off_op[o], scale_log: [off_scale[2 * o], off_scale[2 * o + 1]], rotation: off_rot[o] }
            })
            .collect();
        let parent = u64_at(ids_at + 8 * n + 8 * i);
        triangles.push(TrianglePrimitive {
            vertices: [v3(&verts, 3 * i), v3(&verts, 3 * i + 1), v3(&verts, 3 * i + 2)],
            opacity_logit: opacity[i],
            sharpness_log: sharp[i],
            smoothness_log: smooth[i],
            appearance: AppearanceAttachment { feature, scaling: v3(&scaling, i), offsets },
            id: u64_at(ids_at + 8 * i),
            parent_id: (parent != NO_PARENT).then_some(parent),
        });
    }
    Ok(TriangleSoup { triangles, next_id })
}

pub fn read_checkpoint(path: &Path) -> Result<TriangleSoup> {
    parse_checkpoint(&super::read_bytes(path)?, path)
}

pub fn write_checkpoint(path: &Path, soup: &TriangleSoup) -> Result<()> {
    super::write_bytes(path, &encode_checkpoint(soup)?)
}

/// Rounds every stored value to f32, matching what a checkpoint preserves.
pub fn quantize(soup: &TriangleSoup) -> Result<TriangleSoup> {
    parse_checkpoint(&encode_checkpoint(soup)?, Path::new("<memory>"))
}
