use std::io::Write;

use nalgebra::{Point3, Vector3};

use super::Geometry;
use crate::error::{Error, Result};
use crate::numfmt::fmt_sig;

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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Contents of a PLY file restricted to what the toolkit uses.
#[derive(Debug, Clone)]
pub struct PlyData {
    pub format: PlyFormat,
    pub vertices: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub faces: Vec<Vec<usize>>,
}

impl PlyData {
    /// Converts to [`Geometry`], fanning polygons into triangles.
    pub fn into_geometry(self) -> Geometry {
        let mut faces = Vec::with_capacity(self.faces.len());
        for poly in &self.faces {
            for w in 1..poly.len().saturating_sub(1) {
                faces.push([poly[0], poly[w], poly[w + 1]]);
            }
        }
        Geometry {
            vertices: self.vertices,
            normals: self.normals,
            faces,
        }
    }
}

fn header_error(line: usize, msg: impl Into<String>) -> Error {
    Error::parse(format!("header line {line}"), msg)
}

fn parse_header(bytes: &[u8]) -> Result<(PlyFormat, Vec<Element>, usize)> {
    let mut pos = 0;
    let mut lineno = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| header_error(lineno + 1, "unterminated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| header_error(lineno + 1, "header is not UTF-8"))?
            .trim_end_matches('\r');
        pos += end + 1;
        lineno += 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 {
            if line.trim() != "ply" {
                return Err(header_error(1, "missing 'ply' magic"));
            }
            continue;
        }
        match tokens.as_slice() {
            ["format", kind, _version] => {
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(header_error(lineno, format!("unsupported format {other}")))
                    }
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| header_error(lineno, format!("bad element count {count}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let (Some(count), Some(item)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(header_error(lineno, "unknown list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| header_error(lineno, "property before element"))?
                    .properties
                    .push(Property::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| header_error(lineno, format!("unknown property type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| header_error(lineno, "property before element"))?
                    .properties
                    .push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
            }
            ["end_header"] => break,
            _ => return Err(header_error(lineno, format!("unrecognized line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| header_error(lineno, "missing format line"))?;
    Ok((format, elements, pos))
}

/// One decoded element row: scalar values in property order, lists as vectors.
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

trait RowSource {
    fn row(&mut self, element: &Element) -> Result<Vec<Value>>;
}

struct AsciiRows<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_offset: usize,
}

impl RowSource for AsciiRows<'_> {
    fn row(&mut self, element: &Element) -> Result<Vec<Value>> {
        let (idx, line) = loop {
            let (idx, line) = self
                .lines
                .next()
                .ok_or_else(|| Error::parse("end of file", format!("missing {} rows", element.name)))?;
            if !line.trim().is_empty() {
                break (idx, line);
            }
        };
        let location = format!("line {}", idx + 1 + self.line_offset);
        let mut tokens = line.split_whitespace();
        let mut next = || -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| Error::parse(location.clone(), "too few values"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(location.clone(), e.to_string()))
        };
        let mut out = Vec::with_capacity(element.properties.len());
        for prop in &element.properties {
            match prop {
                Property::Scalar { .. } => out.push(Value::Scalar(next()?)),
                Property::List { .. } => {
                    let n = next()?;
                    if n < 0.0 || n.fract() != 0.0 {
                        return Err(Error::parse(location.clone(), "bad list length"));
                    }
                    let items = (0..n as usize).map(|_| next()).collect::<Result<_>>()?;
                    out.push(Value::List(items));
                }
            }
        }
        Ok(out)
    }
}

struct BinaryRows<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BinaryRows<'_> {
    fn take(&mut self, ty: Scalar) -> Result<f64> {
        let size = ty.size();
        if self.pos + size > self.bytes.len() {
            return Err(Error::parse(
                format!("byte offset {}", self.pos),
                "unexpected end of binary payload",
            ));
        }
        let v = ty.read_le(&self.bytes[self.pos..]);
        self.pos += size;
        Ok(v)
    }
}

impl RowSource for BinaryRows<'_> {
    fn row(&mut self, element: &Element) -> Result<Vec<Value>> {
        let mut out = Vec::with_capacity(element.properties.len());
        for prop in &element.properties {
            match *prop {
                Property::Scalar { ty, .. } => out.push(Value::Scalar(self.take(ty)?)),
                Property::List { count, item, .. } => {
                    let n = self.take(count)?;
                    let items = (0..n as usize).map(|_| self.take(item)).collect::<Result<_>>()?;
                    out.push(Value::List(items));
                }
            }
        }
        Ok(out)
    }
}

/// Parses an ascii or binary little-endian PLY file.
///
/// The `vertex` element must carry `x y z`; `nx ny nz` are picked up when
/// present. Faces are read from a `vertex_indices` (or `vertex_index`) list.
/// Other elements and properties are skipped.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyData> {
    let (format, elements, body) = parse_header(bytes)?;
    let header_lines = bytes[..body].iter().filter(|&&b| b == b'\n').count();
    let mut source: Box<dyn RowSource> = match format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(&bytes[body..])
                .map_err(|_| Error::parse("body", "ascii PLY body is not UTF-8"))?;
            Box::new(AsciiRows {
                lines: text.lines().enumerate(),
                line_offset: header_lines,
            })
        }
        PlyFormat::BinaryLittleEndian => Box::new(BinaryRows { bytes, pos: body }),
    };

    let mut vertices = Vec::new();
    let mut normals: Option<Vec<Vector3<f64>>> = None;
    let mut faces = Vec::new();
    let mut saw_vertex = false;

    for element in &elements {
        let find = |name: &str| element.properties.iter().position(|p| p.name() == name);
        match element.name.as_str() {
            "vertex" => {
                saw_vertex = true;
                let (Some(x), Some(y), Some(z)) = (find("x"), find("y"), find("z")) else {
                    return Err(Error::parse("header", "vertex element lacks x, y, z"));
                };
                let normal_idx = match (find("nx"), find("ny"), find("nz")) {
                    (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                    _ => None,
                };
                let mut ns = Vec::new();
                vertices.reserve(element.count);
                for _ in 0..element.count {
                    let row = source.row(element)?;
                    let get = |i: usize| match &row[i] {
                        Value::Scalar(v) => *v,
                        Value::List(_) => f64::NAN,
                    };
                    vertices.push(Point3::new(get(x), get(y), get(z)));
                    if let Some([a, b, c]) = normal_idx {
                        ns.push(Vector3::new(get(a), get(b), get(c)));
                    }
                }
                if normal_idx.is_some() {
                    normals = Some(ns);
                }
            }
            "face" => {
                let Some(list) = find("vertex_indices").or_else(|| find("vertex_index")) else {
                    return Err(Error::parse("header", "face element lacks vertex_indices"));
                };
                faces.reserve(element.count);
                for face in 0..element.count {
                    let row = source.row(element)?;
                    let Value::List(items) = &row[list] else {
                        return Err(Error::parse("header", "vertex_indices must be a list"));
                    };
                    let poly = items
                        .iter()
                        .map(|&v| {
                            if v < 0.0 {
                                Err(Error::FaceIndexOutOfRange {
                                    face,
                                    index: 0,
                                    vertex_count: vertices.len(),
                                })
                            } else {
                                Ok(v as usize)
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    faces.push(poly);
                }
            }
            _ => {
                for _ in 0..element.count {
                    source.row(element)?;
                }
            }
        }
    }
    if !saw_vertex {
        return Err(Error::parse("header", "no vertex element"));
    }
    Ok(PlyData {
        format,
        vertices,
        normals,
        faces,
    })
}

/// Writes vertices (and normals, and faces when non-empty) as PLY.
///
/// Binary mode stores doubles and reloads bit-identically; ascii mode prints
/// nine significant digits.
pub fn write_ply<W: Write>(
    w: &mut W,
    points: &[Point3<f64>],
    normals: Option<&[Vector3<f64>]>,
    faces: &[[usize; 3]],
    format: PlyFormat,
) -> std::io::Result<()> {
    let fmt_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt_name} 1.0")?;
    writeln!(w, "element vertex {}", points.len())?;
    for c in ["x", "y", "z"] {
        writeln!(w, "property double {c}")?;
    }
    if normals.is_some() {
        for c in ["nx", "ny", "nz"] {
            writeln!(w, "property double {c}")?;
        }
    }
    if !faces.is_empty() {
        writeln!(w, "element face {}", faces.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")?;

    let row = |i: usize| -> Vec<f64> {
        let p = points[i];
        let mut v = vec![p.x, p.y, p.z];
        if let Some(ns) = normals {
            v.extend_from_slice(ns[i].as_slice());
        }
        v
    };
    match format {
        PlyFormat::Ascii => {
            for i in 0..points.len() {
                let line: Vec<String> = row(i).into_iter().map(|v| fmt_sig(v, 9)).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            for f in faces {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for i in 0..points.len() {
                for v in row(i) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            for f in faces {
                w.write_all(&[3u8])?;
                for &idx in f {
                    w.write_all(&(idx as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}
