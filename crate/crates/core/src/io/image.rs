//! 8-bit RGB images (PNG or binary PPM), values in [0, 1].

use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Vec3>,
}

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Rounds colours to the 8-bit grid stored on disk.
pub fn quantize_colors(px: &[Vec3]) -> Vec<Vec3> {
    px.iter().map(|c| c.map(|v| to_u8(v) as f64 / 255.0)).collect()
}

fn format_for(path: &Path) -> ImageFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ppm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    }
}

pub fn decode_image(bytes: &[u8], path: &Path) -> Result<ColorImage> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::malformed(path, e.to_string()))?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0).collect();
    Ok(ColorImage { width: w as usize, height: h as usize, pixels })
}

pub fn encode_image(img: &ColorImage, format: ImageFormat) -> Result<Vec<u8>> {
    let raw: Vec<u8> = img.pixels.iter().flat_map(|c| [to_u8(c.x), to_u8(c.y), to_u8(c.z)]).collect();
    let buf = RgbImage::from_raw(img.width as u32, img.height as u32, raw).ok_or_else(|| Error::ShapeMismatch("pixel count does not match dimensions".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, format).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn read_image(path: &Path) -> Result<ColorImage> {
    decode_image(&super::read_bytes(path)?, path)
}

pub fn write_image(path: &Path, img: &ColorImage) -> Result<()> {
    super::write_bytes(path, &encode_image(img, format_for(path))?)
}
