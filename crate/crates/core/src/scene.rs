//! Scene bundles on disk.
//!
//! Layout: `scene.txt` (key=value), `cameras.txt`, `images/<id>.png`,
//! `depth/<id>.pfm`, `normal/<id>.pfm`, `points.ply`, `tracks.txt`,
//! `split.txt` and an optional ground-truth mesh `gt.ply`.

use std::path::{Path, PathBuf};

use crate::camera::PinholeCamera;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::image::{quantize_colors, read_image, write_image, ColorImage};
use crate::io::pfm::{read_pfm, write_pfm, PfmImage};
use crate::io::ply::{read_ply, write_ply, PlyFormat, PointCloud};
use crate::io::text::*;
use crate::io::{read_text, write_bytes};
use crate::losses::{z_to_ray_depth, SupervisionSet};

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub color: Vec<Vec3>,
    /// Ray depth; 0 marks pixels without a prior.
    pub depth: Vec<f64>,
    pub normal: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl GroundTruth {
    pub fn diagonal(&self) -> f64 {
        crate::planar::bbox_diagonal(&self.vertices)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub kind: String,
    pub cameras: Vec<PinholeCamera>,
    /// One view per camera, same order.
    pub views: Vec<View>,
    pub points: Vec<Vec3>,
    pub tracks: Vec<Track>,
    pub split: Split,
    pub ground_truth: Option<GroundTruth>,
}

impl SceneBundle {
    pub fn camera_index(&self, id: u32) -> Option<usize> {
        self.cameras.iter().position(|c| c.id == id)
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.split.train.iter().filter_map(|id| self.camera_index(*id)).collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.split.test.iter().filter_map(|id| self.camera_index(*id)).collect()
    }

    pub fn supervision(&self, view: usize) -> SupervisionSet {
        let cam = &self.cameras[view];
        let v = &self.views[view];
        SupervisionSet::new(cam.width, cam.height, v.depth.clone(), v.normal.clone(), v.color.clone())
    }

    /// Scene extent: ground-truth diagonal if present, else of the SfM points.
    pub fn diagonal(&self) -> f64 {
        match &self.ground_truth {
            Some(gt) => gt.diagonal(),
            None => crate::planar::bbox_diagonal(&self.points),
        }
    }

    /// Rounds every raster and point to the precision stored on disk.
    pub fn quantized(&self) -> Self {
        let f = |v: f64| v as f32 as f64;
        let mut b = self.clone();
        for v in &mut b.views {
            v.color = quantize_colors(&v.color);
            v.depth.iter_mut().for_each(|d| *d = f(*d));
            v.normal.iter_mut().for_each(|n| *n = n.map(f));
        }
        b.points.iter_mut().for_each(|p| *p = p.map(f));
        if let Some(gt) = &mut b.ground_truth {
            gt.vertices.iter_mut().for_each(|p| *p = p.map(f));
        }
        b
    }

    fn validate(&self, dir: &Path) -> Result<()> {
        let tracks_path = dir.join("tracks.txt");
        for t in &self.tracks {
            if t.point >= self.points.len() {
                return Err(Error::malformed(&tracks_path, format!("track references point {} of {}", t.point, self.points.len())));
            }
            if let Some(o) = t.observations.iter().find(|o| self.camera_index(o.camera).is_none()) {
                return Err(Error::malformed(&tracks_path, format!("track references unknown camera {}", o.camera)));
            }
        }
        if let Some(id) = self.split.train.iter().chain(&self.split.test).find(|id| self.camera_index(**id).is_none()) {
            return Err(Error::malformed(dir.join("split.txt"), format!("unknown camera {id}")));
        }
        Ok(())
    }
}

fn view_file(dir: &Path, sub: &str, id: u32, ext: &str) -> PathBuf {
    dir.join(sub).join(format!("{id:04}.{ext}"))
}

fn find_image(dir: &Path, id: u32) -> PathBuf {
    let png = view_file(dir, "images", id, "png");
    let ppm = view_file(dir, "images", id, "ppm");
    if !png.exists() && ppm.exists() {
        ppm
    } else {
        png
    }
}

fn check_dims(path: &Path, w: usize, h: usize, channels: usize, cam: &PinholeCamera, want_channels: usize) -> Result<()> {
    if w != cam.width || h != cam.height || channels != want_channels {
        return Err(Error::DimensionMismatch { path: path.into(), msg: format!("{w}x{h}x{channels}, camera {} expects {}x{}x{want_channels}", cam.id, cam.width, cam.height) });
    }
    Ok(())
}

pub fn load_scene(dir: &Path) -> Result<SceneBundle> {
    let meta_path = dir.join("scene.txt");
    let meta = if meta_path.exists() { parse_key_values(&read_text(&meta_path)?)? } else { Default::default() };
    let kind = meta.get("kind").cloned().unwrap_or_else(|| "external".into());
    let z_depth = match meta.get("depth_convention").map(String::as_str) {
        None | Some("ray") => false,
        Some("z") => true,
        Some(other) => return Err(Error::malformed(&meta_path, format!("unknown depth_convention `{other}`"))),
    };
    let cam_path = dir.join("cameras.txt");
    let cameras = parse_cameras(&read_text(&cam_path)?, &cam_path)?;
    let mut views = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        let ip = find_image(dir, cam.id);
        let img = read_image(&ip)?;
        check_dims(&ip, img.width, img.height, 3, cam, 3)?;
        let dp = view_file(dir, "depth", cam.id, "pfm");
        let d = read_pfm(&dp)?;
        check_dims(&dp, d.width, d.height, d.channels, cam, 1)?;
        let np = view_file(dir, "normal", cam.id, "pfm");
        let n = read_pfm(&np)?;
        check_dims(&np, n.width, n.height, n.channels, cam, 3)?;
        let mut depth = d.to_gray();
        if z_depth {
            depth = z_to_ray_depth(&depth, cam);
        }
        views.push(View { color: img.pixels, depth, normal: n.to_rgb() });
    }
    let points = read_ply(&dir.join("points.ply"))?.positions;
    let tp = dir.join("tracks.txt");
    let tracks = parse_tracks(&read_text(&tp)?, &tp)?;
    let sp = dir.join("split.txt");
    let split = if sp.exists() { parse_split(&read_text(&sp)?, &sp)? } else { Split { train: cameras.iter().map(|c| c.id).collect(), test: Vec::new() } };
    let gp = dir.join("gt.ply");
    let ground_truth = if gp.exists() {
        let c = read_ply(&gp)?;
        Some(GroundTruth { vertices: c.positions, faces: c.faces })
    } else {
        None
    };
    let bundle = SceneBundle { kind, cameras, views, points, tracks, split, ground_truth };
    bundle.validate(dir)?;
    Ok(bundle)
}

pub fn save_scene(dir: &Path, bundle: &SceneBundle) -> Result<()> {
    let meta = format_key_values([("kind", bundle.kind.clone()), ("depth_convention", "ray".to_string())]);
    write_bytes(&dir.join("scene.txt"), meta.as_bytes())?;
    write_bytes(&dir.join("cameras.txt"), format_cameras(&bundle.cameras).as_bytes())?;
    if bundle.views.len() != bundle.cameras.len() {
        return Err(Error::ShapeMismatch(format!("{} views for {} cameras", bundle.views.len(), bundle.cameras.len())));
    }
    for (cam, v) in bundle.cameras.iter().zip(&bundle.views) {
        let (w, h) = (cam.width, cam.height);
        write_image(&view_file(dir, "images", cam.id, "png"), &ColorImage { width: w, height: h, pixels: v.color.clone() })?;
        write_pfm(&view_file(dir, "depth", cam.id, "pfm"), &PfmImage::gray(w, h, &v.depth))?;
        write_pfm(&view_file(dir, "normal", cam.id, "pfm"), &PfmImage::rgb(w, h, &v.normal))?;
    }
    write_ply(&dir.join("points.ply"), &PointCloud { positions: bundle.points.clone(), ..Default::default() }, PlyFormat::BinaryLittleEndian)?;
    write_bytes(&dir.join("tracks.txt"), format_tracks(&bundle.tracks).as_bytes())?;
    write_bytes(&dir.join("split.txt"), format_split(&bundle.split).as_bytes())?;
    if let Some(gt) = &bundle.ground_truth {
        write_ply(&dir.join("gt.ply"), &PointCloud { positions: gt.vertices.clone(), faces: gt.faces.clone(), ..Default::default() }, PlyFormat::BinaryLittleEndian)?;
    }
    Ok(())
}
