//! Whitespace-separated tables: cameras, SfM tracks, view splits, and flat
//! `key=value` configuration.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use nalgebra::Matrix3;

use crate::camera::PinholeCamera;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Rotation orthonormality tolerance for `cameras.txt`.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: std::str::FromStr>(tok: &str, path: &Path, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::malformed(path, format!("line {line}: bad {what} `{tok}`")))
}

/// One camera per line: `id w h fx fy cx cy r00 .. r22 t0 t1 t2`.
pub fn parse_cameras(text: &str, path: &Path) -> Result<Vec<PinholeCamera>> {
    let mut out: Vec<PinholeCamera> = Vec::new();
    for (line, l) in content_lines(text) {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 19 {
            return Err(Error::malformed(path, format!("line {line}: expected 19 fields, found {}", t.len())));
        }
        let id: u32 = field(t[0], path, line, "id")?;
        let width: usize = field(t[1], path, line, "width")?;
        let height: usize = field(t[2], path, line, "height")?;
        let mut f = [0.0f64; 16];
        for (k, v) in f.iter_mut().enumerate() {
            *v = field(t[3 + k], path, line, "number")?;
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::malformed(path, format!("line {line}: non-finite value")));
        }
        if width == 0 || height == 0 || width > 1 << 16 || height > 1 << 16 || f[0] <= 0.0 || f[1] <= 0.0 {
            return Err(Error::malformed(path, format!("line {line}: invalid intrinsics")));
        }
        let cam = PinholeCamera {
            id,
            width,
            height,
            fx: f[0],
            fy: f[1],
            cx: f[2],
            cy: f[3],
            rotation: Matrix3::from_row_slice(&f[4..13]),
            translation: Vec3::new(f[13], f[14], f[15]),
        };
        if !cam.rotation_is_valid(ROTATION_TOLERANCE) {
            return Err(Error::malformed(path, format!("line {line}: rotation is not orthonormal with det +1")));
        }
        if out.iter().any(|c| c.id == id) {
            return Err(Error::malformed(path, format!("line {line}: duplicate camera id {id}")));
        }
        out.push(cam);
    }
    Ok(out)
}

pub fn format_cameras(cameras: &[PinholeCamera]) -> String {
    let mut s = String::from("# id w h fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 t0 t1 t2\n");
    for c in cameras {
        write!(s, "{} {} {} {} {} {} {}", c.id, c.width, c.height, c.fx, c.fy, c.cx, c.cy).unwrap();
        for r in 0..3 {
            for k in 0..3 {
                write!(s, " {}", c.rotation[(r, k)]).unwrap();
            }
        }
        writeln!(s, " {} {} {}", c.translation.x, c.translation.y, c.translation.z).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub camera: u32,
    pub pixel: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub point: usize,
    pub observations: Vec<Observation>,
}

/// One track per line: `point cam x y [cam x y ...]`.
pub fn parse_tracks(text: &str, path: &Path) -> Result<Vec<Track>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 4 || (t.len() - 1) % 3 != 0 {
            return Err(Error::malformed(path, format!("line {line}: expected point index then camera/x/y triples")));
        }
        let point = field(t[0], path, line, "point index")?;
        let mut observations = Vec::with_capacity((t.len() - 1) / 3);
        for c in t[1..].chunks_exact(3) {
            let camera = field(c[0], path, line, "camera id")?;
            let pixel: [f64; 2] = [field(c[1], path, line, "pixel")?, field(c[2], path, line, "pixel")?];
            if !pixel.iter().all(|v| v.is_finite()) {
                return Err(Error::malformed(path, format!("line {line}: non-finite pixel")));
            }
            observations.push(Observation { camera, pixel });
        }
        out.push(Track { point, observations });
    }
    Ok(out)
}

pub fn format_tracks(tracks: &[Track]) -> String {
    let mut s = String::from("# point cam x y [cam x y ...]\n");
    for t in tracks {
        write!(s, "{}", t.point).unwrap();
        for o in &t.observations {
            write!(s, " {} {} {}", o.camera, o.pixel[0], o.pixel[1]).unwrap();
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<u32>,
    pub test: Vec<u32>,
}

/// One view per line: `camera_id train|test`.
pub fn parse_split(text: &str, path: &Path) -> Result<Split> {
    let mut split = Split::default();
    for (line, l) in content_lines(text) {
        let t: Vec<&str> = l.split_whitespace().collect();
        let [id, role] = t.as_slice() else {
            return Err(Error::malformed(path, format!("line {line}: expected `camera_id train|test`")));
        };
        let id: u32 = field(id, path, line, "camera id")?;
        if split.train.contains(&id) || split.test.contains(&id) {
            return Err(Error::malformed(path, format!("line {line}: camera {id} listed twice")));
        }
        match *role {
            "train" => split.train.push(id),
            "test" => split.test.push(id),
            other => return Err(Error::malformed(path, format!("line {line}: unknown role `{other}`"))),
        }
    }
    Ok(split)
}

pub fn format_split(split: &Split) -> String {
    let mut s = String::new();
    for id in &split.train {
        writeln!(s, "{id} train").unwrap();
    }
    for id in &split.test {
        writeln!(s, "{id} test").unwrap();
    }
    s
}

/// Flat `key=value` lines; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (line, l) in content_lines(text) {
        let (k, v) = l.split_once('=').ok_or_else(|| Error::InvalidConfig(format!("line {line}: expected key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::InvalidConfig(format!("line {line}: empty key")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::InvalidConfig(format!("line {line}: duplicate key `{k}`")));
        }
    }
    Ok(out)
}

pub fn format_key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        writeln!(s, "{k}={v}").unwrap();
    }
    s
}
