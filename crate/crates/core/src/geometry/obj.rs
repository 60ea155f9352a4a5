use std::io::BufRead;

use nalgebra::Point3;

use super::Geometry;
use crate::error::{Error, Result};

/// Counters collected while reading an OBJ file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObjStats {
    pub vertex_normals: usize,
    pub ignored_lines: usize,
}

/// Parses the `v` / `vn` / `f` subset of Wavefront OBJ.
///
/// Face corners may use the `i`, `i/t`, `i//n` or `i/t/n` forms; polygons with
/// more than three corners are fanned into triangles. Normals given by `vn`
/// are counted but not used, since vertex normals are derived from faces.
pub fn parse_obj<R: BufRead>(reader: R) -> Result<(Geometry, ObjStats)> {
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut stats = ObjStats::default();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::parse(format!("line {lineno}"), e.to_string()))?;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(tag) = tokens.next() else {
            continue;
        };
        match tag {
            "v" => {
                let coords = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| Error::parse(format!("line {lineno}"), e.to_string()))?;
                if coords.len() != 3 {
                    return Err(Error::parse(
                        format!("line {lineno}"),
                        "vertex needs three coordinates",
                    ));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "vn" => stats.vertex_normals += 1,
            "f" => {
                let corners = tokens
                    .map(|t| {
                        t.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<i64>()
                            .map_err(|e| Error::parse(format!("line {lineno}"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if corners.len() < 3 {
                    return Err(Error::parse(
                        format!("line {lineno}"),
                        "face needs at least three corners",
                    ));
                }
                raw_faces.push((vertices.len(), corners));
            }
            _ => stats.ignored_lines += 1,
        }
    }

    if stats.ignored_lines > 0 {
        log::warn!("ignored {} unsupported OBJ lines", stats.ignored_lines);
    }

    // Indices are resolved after reading so that faces may reference vertices
    // declared later; negative indices are relative to the vertices seen so far.
    let vertex_count = vertices.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (seen, corners) in raw_faces {
        let resolved = corners
            .iter()
            .map(|&c| {
                let idx = match c {
                    c if c > 0 => c - 1,
                    c if c < 0 => seen as i64 + c,
                    _ => -1,
                };
                if idx < 0 || idx as usize >= vertex_count {
                    Err(Error::FaceIndexOutOfRange {
                        face: faces.len() + 1,
                        index: c.unsigned_abs() as usize,
                        vertex_count,
                    })
                } else {
                    Ok(idx as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for w in 1..resolved.len() - 1 {
            faces.push([resolved[0], resolved[w], resolved[w + 1]]);
        }
    }

    Ok((
        Geometry {
            vertices,
            normals: None,
            faces,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let (g, stats) = parse_obj(src.as_bytes()).unwrap();
        let mesh = g.mesh().unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
        assert_eq!(stats, ObjStats::default());
    }

    #[test]
    fn face_index_out_of_range_names_face() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n";
        let err = parse_obj(src.as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::FaceIndexOutOfRange { face: 1, index: 5, vertex_count: 3 }),
            "{err}"
        );
    }

    #[test]
    fn slash_forms_and_ignored_directives() {
        let src = "o thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nvn 0 0 1\nvt 0 0\n\
                   f 1//1 2//1 4//1 3//1\ns off\n";
        let (g, stats) = parse_obj(src.as_bytes()).unwrap();
        assert_eq!(g.faces, vec![[0, 1, 3], [0, 3, 2]]);
        assert_eq!(stats.vertex_normals, 1);
        assert_eq!(stats.ignored_lines, 3);
    }

    #[test]
    fn malformed_vertex_reports_line() {
        let err = parse_obj("v 0 0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
