//! Portable float maps: `PF` (3 channels) or `Pf` (1 channel), rows stored
//! bottom to top, negative scale for little-endian data.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Row-major, top row first.
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn gray(width: usize, height: usize, values: &[f64]) -> Self {
        Self { width, height, channels: 1, data: values.iter().map(|v| *v as f32).collect() }
    }

    pub fn rgb(width: usize, height: usize, values: &[crate::Vec3]) -> Self {
        Self { width, height, channels: 3, data: values.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32]).collect() }
    }

    pub fn to_gray(&self) -> Vec<f64> {
        self.data.iter().map(|v| *v as f64).collect()
    }

    pub fn to_rgb(&self) -> Vec<crate::Vec3> {
        self.data.chunks_exact(3).map(|c| crate::Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect()
    }
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn number<T: std::str::FromStr>(tok: Option<&[u8]>, path: &Path, what: &str) -> Result<T> {
    tok.and_then(|t| std::str::from_utf8(t).ok()).and_then(|s| s.parse().ok()).ok_or_else(|| Error::malformed(path, format!("bad {what}")))
}

pub fn parse_pfm(bytes: &[u8], path: &Path) -> Result<PfmImage> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos) {
        Some(b"PF") => 3,
        Some(b"Pf") => 1,
        _ => return Err(Error::malformed(path, "expected PF or Pf magic")),
    };
    let width: usize = number(token(bytes, &mut pos), path, "width")?;
    let height: usize = number(token(bytes, &mut pos), path, "height")?;
    let scale: f64 = number(token(bytes, &mut pos), path, "scale")?;
    if width == 0 || height == 0 {
        return Err(Error::malformed(path, "zero dimension"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::malformed(path, "scale must be finite and non-zero"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::malformed(path, "missing separator before data"));
    }
    pos += 1;
    let count = width.checked_mul(height).and_then(|n| n.checked_mul(channels)).ok_or_else(|| Error::malformed(path, "dimensions overflow"))?;
    let body = &bytes[pos..];
    if count.checked_mul(4) != Some(body.len()) {
        return Err(Error::DimensionMismatch { path: path.into(), msg: format!("expected {} data bytes, found {}", count.saturating_mul(4), body.len()) });
    }
    let little = scale < 0.0;
    let row = width * channels;
    let mut data = vec![0f32; count];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (file_row, col) = (i / row, i % row);
        data[(height - 1 - file_row) * row + col] = v;
    }
    Ok(PfmImage { width, height, channels, data })
}

/// Little-endian encoding with scale -1.
pub fn encode_pfm(img: &PfmImage) -> Vec<u8> {
    assert_eq!(img.data.len(), img.width * img.height * img.channels, "pfm data length");
    let magic = if img.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1\n", img.width, img.height).into_bytes();
    let row = img.width * img.channels;
    for r in (0..img.height).rev() {
        for v in &img.data[r * row..(r + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    parse_pfm(&super::read_bytes(path)?, path)
}

pub fn write_pfm(path: &Path, img: &PfmImage) -> Result<()> {
    super::write_bytes(path, &encode_pfm(img))
}
