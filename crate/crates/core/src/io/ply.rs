//! PLY point clouds and triangle meshes, ASCII or binary little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub labels: Option<Vec<i32>>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn integral(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(Scalar, String),
    List(Scalar, Scalar, String),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Reader<'a> {
    body: &'a [u8],
    pos: usize,
    format: PlyFormat,
    path: &'a Path,
}

impl Reader<'_> {
    fn truncated(&self) -> Error {
        Error::DimensionMismatch { path: self.path.into(), msg: "data ends before all elements were read".into() }
    }

    fn read(&mut self, ty: Scalar) -> Result<f64> {
        match self.format {
            PlyFormat::BinaryLittleEndian => {
                let n = ty.size();
                let end = self.pos.checked_add(n).filter(|e| *e <= self.body.len()).ok_or_else(|| self.truncated())?;
                let b = &self.body[self.pos..end];
                self.pos = end;
                Ok(match ty {
                    Scalar::I8 => b[0] as i8 as f64,
                    Scalar::U8 => b[0] as f64,
                    Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
                    Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
                    Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
                })
            }
            PlyFormat::Ascii => {
                while self.pos < self.body.len() && self.body[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                let start = self.pos;
                while self.pos < self.body.len() && !self.body[self.pos].is_ascii_whitespace() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.truncated());
                }
                let s = std::str::from_utf8(&self.body[start..self.pos]).map_err(|_| self.bad_value())?;
                let v: f64 = if ty.integral() { s.parse::<i64>().map_err(|_| self.bad_value())? as f64 } else { s.parse::<f32>().map(f64::from).or_else(|_| s.parse::<f64>()).map_err(|_| self.bad_value())? };
                if ty == Scalar::F32 {
                    return Ok(v as f32 as f64);
                }
                Ok(v)
            }
        }
    }

    fn bad_value(&self) -> Error {
        Error::malformed(self.path, format!("unparsable value at byte {}", self.pos))
    }

    fn remaining(&self) -> usize {
        self.body.len() - self.pos
    }
}

fn header_end(bytes: &[u8]) -> Option<usize> {
    const END: &[u8] = b"end_header";
    let mut i = 0;
    while i + END.len() <= bytes.len() {
        if &bytes[i..i + END.len()] == END && (i == 0 || bytes[i - 1] == b'\n') {
            let mut j = i + END.len();
            if bytes.get(j) == Some(&b'\r') {
                j += 1;
            }
            return (bytes.get(j) == Some(&b'\n')).then_some(j + 1);
        }
        i += 1;
    }
    None
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    let bad = |msg: String| Error::malformed(path, msg);
    let data_start = header_end(bytes).ok_or_else(|| bad("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..data_start]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["format", f, "1.0"] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(bad(format!("unsupported format {other}"))),
                })
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| bad(format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", c, i, name] => {
                let (c, i) = (Scalar::parse(c), Scalar::parse(i));
                let (Some(c), Some(i)) = (c, i) else { return Err(bad(format!("bad list types for {name}"))) };
                if !c.integral() || !i.integral() {
                    return Err(bad(format!("list {name} must use integer types")));
                }
                elements.last_mut().ok_or_else(|| bad("property before element".into()))?.properties.push(Property::List(c, i, name.to_string()));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown property type {ty}")))?;
                elements.last_mut().ok_or_else(|| bad("property before element".into()))?.properties.push(Property::Scalar(ty, name.to_string()));
            }
            _ => return Err(bad(format!("unrecognised header line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| bad("missing format line".into()))?;
    let mut reader = Reader { body: &bytes[data_start..], pos: 0, format, path };
    let mut cloud = PointCloud::default();
    let mut saw_vertex = false;
    for el in &elements {
        let names: Vec<&str> = el.properties.iter().map(|p| match p {
            Property::Scalar(_, n) | Property::List(_, _, n) => n.as_str(),
        }).collect();
        let find = |n: &str| names.iter().position(|x| *x == n);
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        let (xyz, nrm, rgb, label) = if is_vertex {
            saw_vertex = true;
            let xyz = [find("x"), find("y"), find("z")];
            if xyz.iter().any(Option::is_none) {
                return Err(bad("vertex element lacks x, y, z".into()));
            }
            let nrm = [find("nx"), find("ny"), find("nz")];
            let rgb = [find("red"), find("green"), find("blue")];
            (xyz.map(Option::unwrap), nrm.iter().all(Option::is_some).then(|| nrm.map(Option::unwrap)), rgb.iter().all(Option::is_some).then(|| rgb.map(Option::unwrap)), find("label"))
        } else {
            ([0; 3], None, None, None)
        };
        let face_list = if is_face { find("vertex_indices").or_else(|| find("vertex_index")) } else { None };
        // every item occupies at least one byte, so larger counts are truncated input
        if el.properties.is_empty() {
            continue;
        }
        if el.count > reader.remaining() {
            return Err(reader.truncated());
        }
        if is_vertex {
            cloud.positions.reserve(el.count);
            if nrm.is_some() {
                cloud.normals = Some(Vec::with_capacity(el.count));
            }
            if rgb.is_some() {
                cloud.colors = Some(Vec::with_capacity(el.count));
            }
            if label.is_some() {
                cloud.labels = Some(Vec::with_capacity(el.count));
            }
        }
        let mut values = vec![0.0; el.properties.len()];
        let mut list: Vec<f64> = Vec::new();
        for _ in 0..el.count {
            for (k, p) in el.properties.iter().enumerate() {
                match p {
                    Property::Scalar(ty, _) => values[k] = reader.read(*ty)?,
                    Property::List(cty, ity, _) => {
                        let n = reader.read(*cty)?;
                        if n < 0.0 || n > reader.remaining() as f64 {
                            return Err(reader.truncated());
                        }
                        let n = n as usize;
                        let keep = face_list == Some(k);
                        if keep {
                            list.clear();
                        }
                        for _ in 0..n {
                            let v = reader.read(*ity)?;
                            if keep {
                                list.push(v);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                cloud.positions.push(Vec3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]));
                if let (Some(n), Some(out)) = (nrm, cloud.normals.as_mut()) {
                    out.push(Vec3::new(values[n[0]], values[n[1]], values[n[2]]));
                }
                if let (Some(c), Some(out)) = (rgb, cloud.colors.as_mut()) {
                    out.push(c.map(|i| values[i].clamp(0.0, 255.0) as u8));
                }
                if let (Some(l), Some(out)) = (label, cloud.labels.as_mut()) {
                    out.push(values[l] as i32);
                }
            } else if face_list.is_some() {
                if list.len() < 3 || list.iter().any(|v| *v < 0.0 || *v > u32::MAX as f64) {
                    return Err(bad("face needs at least three non-negative indices".into()));
                }
                for i in 1..list.len() - 1 {
                    cloud.faces.push([list[0] as u32, list[i] as u32, list[i + 1] as u32]);
                }
            }
        }
    }
    if !saw_vertex {
        return Err(bad("no vertex element".into()));
    }
    let n = cloud.positions.len() as u64;
    if cloud.faces.iter().flatten().any(|i| *i as u64 >= n) {
        return Err(Error::DimensionMismatch { path: path.into(), msg: "face index out of range".into() });
    }
    Ok(cloud)
}

pub fn encode_ply(cloud: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let n = cloud.positions.len();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut h = format!("ply\nformat {fmt} 1.0\nelement vertex {n}\nproperty float x\nproperty float y\nproperty float z\n");
    if cloud.normals.is_some() {
        h += "property float nx\nproperty float ny\nproperty float nz\n";
    }
    if cloud.colors.is_some() {
        h += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    if cloud.labels.is_some() {
        h += "property int label\n";
    }
    if !cloud.faces.is_empty() {
        h += &format!("element face {}\nproperty list uchar int vertex_indices\n", cloud.faces.len());
    }
    h += "end_header\n";
    let mut out = h.into_bytes();
    for i in 0..n {
        let mut floats = vec![cloud.positions[i]];
        if let Some(nr) = &cloud.normals {
            floats.push(nr[i]);
        }
        match format {
            PlyFormat::Ascii => {
                let mut fields: Vec<String> = floats.iter().flat_map(|v| [v.x as f32, v.y as f32, v.z as f32]).map(|f| f.to_string()).collect();
                if let Some(c) = &cloud.colors {
                    fields.extend(c[i].iter().map(u8::to_string));
                }
                if let Some(l) = &cloud.labels {
                    fields.push(l[i].to_string());
                }
                out.extend_from_slice(fields.join(" ").as_bytes());
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => {
                for v in &floats {
                    for c in [v.x, v.y, v.z] {
                        out.extend_from_slice(&(c as f32).to_le_bytes());
                    }
                }
                if let Some(c) = &cloud.colors {
                    out.extend_from_slice(&c[i]);
                }
                if let Some(l) = &cloud.labels {
                    out.extend_from_slice(&l[i].to_le_bytes());
                }
            }
        }
    }
    for f in &cloud.faces {
        match format {
            PlyFormat::Ascii => out.extend_from_slice(format!("3 {} {} {}\n", f[0], f[1], f[2]).as_bytes()),
            PlyFormat::BinaryLittleEndian => {
                out.push(3);
                for i in f {
                    out.extend_from_slice(&(*i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    parse_ply(&super::read_bytes(path)?, path)
}

pub fn write_ply(path: &Path, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    super::write_bytes(path, &encode_ply(cloud, format))
}
