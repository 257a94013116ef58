use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::Pose;
use crate::graph::PartId;

/// A point set in meters belonging to one part (or to a subassembly whose
/// anchor part is `part`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub part: PartId,
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(part: PartId, points: Vec<Point3<f64>>) -> Self {
        Self { part, points }
    }

    pub fn from_arrays(part: PartId, points: &[[f64; 3]]) -> Self {
        Self::new(
            part,
            points
                .iter()
                .map(|p| Point3::new(p[0], p[1], p[2]))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        PointCloud {
            part: self.part,
            points: self
                .points
                .iter()
                .map(|p| pose.transform_point(p))
                .collect(),
        }
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }

    /// Largest distance from the local origin to any point.
    pub fn radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.coords.norm())
            .fold(0.0, f64::max)
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    pub fn from_points(points: &[Point3<f64>]) -> Option<Aabb> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Some(Aabb { min, max })
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Strict interior test; points on the faces are outside.
    pub fn contains_strict(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for i in 0..3 {
            out.min[i] = out.min[i].min(other.min[i]);
            out.max[i] = out.max[i].max(other.max[i]);
        }
        out
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2.sqrt()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CloudIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Xyz { line: usize, msg: String },
    #[error("ply: {0}")]
    Ply(String),
    #[error("unsupported cloud file extension `{0}`")]
    Extension(String),
}

/// Loads a `.ply` or `.xyz` file by extension.
pub fn load_cloud(path: &Path, part: PartId) -> Result<PointCloud, CloudIoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let points = match ext.as_str() {
        "ply" => read_ply(&mut BufReader::new(fs::File::open(path)?))?,
        "xyz" | "txt" => read_xyz(BufReader::new(fs::File::open(path)?))?,
        other => return Err(CloudIoError::Extension(other.to_string())),
    };
    Ok(PointCloud::new(part, points))
}

/// Whitespace separated `x y z` per line; extra columns are ignored, `#`
/// starts a comment.
pub fn read_xyz<R: BufRead>(reader: R) -> Result<Vec<Point3<f64>>, CloudIoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let vals: Vec<f64> = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .take(3)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CloudIoError::Xyz {
                line: i + 1,
                msg: e.to_string(),
            })?;
        if vals.len() < 3 {
            return Err(CloudIoError::Xyz {
                line: i + 1,
                msg: "expected three coordinates".into(),
            });
        }
        out.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

pub fn write_xyz(points: &[Point3<f64>]) -> String {
    let mut s = String::new();
    for p in points {
        s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy)]
enum ScalarKind {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarKind {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, ScalarKind),
    List(ScalarKind, ScalarKind),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn ply_err(msg: impl Into<String>) -> CloudIoError {
    CloudIoError::Ply(msg.into())
}

/// Reads the `vertex` element's x/y/z from an ASCII or binary little-endian
/// PLY stream. Other elements and properties are skipped.
pub fn read_ply<R: BufRead>(reader: &mut R) -> Result<Vec<Point3<f64>>, CloudIoError> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(ply_err("missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(ply_err("unexpected end of header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLe),
            ["format", other, _] => return Err(ply_err(format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| ply_err(format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", len_ty, item_ty, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ply_err("property before element"))?;
                let l = ScalarKind::parse(len_ty).ok_or_else(|| ply_err("bad list type"))?;
                let i = ScalarKind::parse(item_ty).ok_or_else(|| ply_err("bad list type"))?;
                el.props.push(Property::List(l, i));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ply_err("property before element"))?;
                let k = ScalarKind::parse(ty)
                    .ok_or_else(|| ply_err(format!("unknown property type `{ty}`")))?;
                el.props.push(Property::Scalar(name.to_string(), k));
            }
            _ => {
                return Err(ply_err(format!(
                    "unrecognized header line `{}`",
                    line.trim()
                )))
            }
        }
    }
    let format = format.ok_or_else(|| ply_err("missing format line"))?;

    let mut points = Vec::new();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let axis_of = |name: &str| match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        if is_vertex {
            let named: Vec<Option<usize>> = el
                .props
                .iter()
                .map(|p| match p {
                    Property::Scalar(n, _) => axis_of(n),
                    Property::List(..) => None,
                })
                .collect();
            for a in 0..3 {
                if !named.contains(&Some(a)) {
                    return Err(ply_err("vertex element lacks x/y/z"));
                }
            }
        }
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            match format {
                PlyFormat::Ascii => {
                    line.clear();
                    if reader.read_line(&mut line)? == 0 {
                        return Err(ply_err("unexpected end of data"));
                    }
                    let mut toks = line.split_whitespace();
                    for prop in &el.props {
                        match prop {
                            Property::Scalar(name, _) => {
                                let tok = toks.next().ok_or_else(|| ply_err("short data row"))?;
                                if is_vertex {
                                    if let Some(a) = axis_of(name) {
                                        xyz[a] = tok
                                            .parse()
                                            .map_err(|_| ply_err(format!("bad number `{tok}`")))?;
                                    }
                                }
                            }
                            Property::List(..) => {
                                let n: usize = toks
                                    .next()
                                    .and_then(|t| t.parse().ok())
                                    .ok_or_else(|| ply_err("bad list length"))?;
                                for _ in 0..n {
                                    toks.next().ok_or_else(|| ply_err("short list"))?;
                                }
                            }
                        }
                    }
                }
                PlyFormat::BinaryLe => {
                    let mut buf = [0u8; 8];
                    for prop in &el.props {
                        match prop {
                            Property::Scalar(name, kind) => {
                                reader.read_exact(&mut buf[..kind.size()])?;
                                if is_vertex {
                                    if let Some(a) = axis_of(name) {
                                        xyz[a] = kind.decode(&buf);
                                    }
                                }
                            }
                            Property::List(len_kind, item_kind) => {
                                reader.read_exact(&mut buf[..len_kind.size()])?;
                                let n = len_kind.decode(&buf) as usize;
                                let mut skip = vec![0u8; n * item_kind.size()];
                                reader.read_exact(&mut skip)?;
                            }
                        }
                    }
                }
            }
            if is_vertex {
                points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    Ok(points)
}

pub fn write_ply_ascii(points: &[Point3<f64>]) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    );
    s.push_str(&write_xyz(points));
    s
}

pub fn write_ply_binary(points: &[Point3<f64>]) -> Vec<u8> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )
    .into_bytes();
    for p in points {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample() -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, 0.5, -1.0),
            Point3::new(1.25, 2.0, 3.0),
            Point3::new(-0.75, 0.0, 0.125),
        ]
    }

    #[test]
    fn ascii_ply_round_trip() {
        let text = write_ply_ascii(&sample());
        let pts = read_ply(&mut Cursor::new(text)).unwrap();
        assert_eq!(pts, sample());
    }

    #[test]
    fn binary_ply_round_trip_in_f32_precision() {
        let bytes = write_ply_binary(&sample());
        let pts = read_ply(&mut Cursor::new(bytes)).unwrap();
        assert_eq!(pts, sample());
    }

    #[test]
    fn ply_with_faces_and_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty uchar red\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 255 0 0\n1 0 0 0\n0 3 1 0\n3 0 1 2\n";
        let pts = read_ply(&mut Cursor::new(text)).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2], Point3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn xyz_parsing() {
        let text = "# header\n1 2 3\n\n4,5,6 extra\n";
        let pts = read_xyz(Cursor::new(text)).unwrap();
        assert_eq!(
            pts,
            vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]
        );
        assert!(read_xyz(Cursor::new("1 2\n")).is_err());
    }

    #[test]
    fn aabb_distance() {
        let b = Aabb::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        assert_eq!(b.distance(&Point3::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance(&Point3::new(2.0, 0.5, 0.5)) - 1.0).abs() < 1e-15);
        assert!(b.contains(&Point3::new(1.0, 1.0, 1.0)));
        assert!(!b.contains_strict(&Point3::new(1.0, 0.5, 0.5)));
    }
}
