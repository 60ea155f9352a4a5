//! Point clouds, triangle meshes, and the preprocessing that turns one into the other.

mod obj;
mod ply;
pub mod synthetic;

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use obj::parse_obj;
pub use ply::{parse_ply, write_ply, PlyData, PlyFormat};
pub use synthetic::{generate_synthetic, ShapeSpec};

/// Tolerance on the length of stored normals.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// A triangle mesh with consistently oriented faces.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index ranges and rejecting degenerate faces.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let vertex_count = vertices.len();
        for (face, tri) in faces.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&v| v >= vertex_count) {
                return Err(Error::FaceIndexOutOfRange {
                    face,
                    index,
                    vertex_count,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateFace { face });
            }
        }
        Ok(Self { vertices, faces })
    }

    /// Area-weighted vertex normals.
    ///
    /// Each face contributes its oriented normal scaled by its area, which is
    /// half the cross product of two edges; the constant factor drops out
    /// after normalization so the raw cross product is accumulated.
    pub fn compute_vertex_normals(&self) -> Result<Vec<Vector3<f64>>> {
        let mut sums = vec![Vector3::zeros(); self.vertices.len()];
        let mut magnitudes = vec![0.0f64; self.vertices.len()];
        for &[i, j, k] in &self.faces {
            let (p0, p1, p2) = (self.vertices[i], self.vertices[j], self.vertices[k]);
            let cross = (p1 - p0).cross(&(p2 - p0));
            let mag = cross.norm();
            for v in [i, j, k] {
                sums[v] += cross;
                magnitudes[v] += mag;
            }
        }
        sums.into_iter()
            .zip(magnitudes)
            .enumerate()
            .map(|(vertex, (sum, mag))| {
                let norm = sum.norm();
                if !(norm > 1e-12 * mag) || norm == 0.0 {
                    Err(Error::ZeroNormal { vertex })
                } else {
                    Ok(sum / norm)
                }
            })
            .collect()
    }

    /// The point cloud formed by the vertices and their area-weighted normals.
    pub fn to_cloud(&self) -> Result<PointCloud> {
        let normals = self.compute_vertex_normals()?;
        PointCloud::new(self.vertices.clone(), normals)
    }
}

/// Positions with oriented unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Vec<Vector3<f64>>,
}

impl PointCloud {
    /// Builds a cloud, checking lengths and that every normal is unit to within [`UNIT_TOLERANCE`].
    pub fn new(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::LengthMismatch {
                points: points.len(),
                normals: normals.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let length = n.norm();
            if !((length - 1.0).abs() <= UNIT_TOLERANCE) {
                return Err(Error::NonUnitNormal { index, length });
            }
        }
        Ok(Self { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    pub fn normal(&self, i: usize) -> Vector3<f64> {
        self.normals[i]
    }

    /// Same positions, new normal field.
    pub fn with_normals(&self, normals: Vec<Vector3<f64>>) -> Result<Self> {
        Self::new(self.points.clone(), normals)
    }

    pub fn into_parts(self) -> (Vec<Point3<f64>>, Vec<Vector3<f64>>) {
        (self.points, self.normals)
    }

    /// Length of the diagonal of the axis-aligned bounding box; 0 for an empty cloud.
    pub fn bounding_box_diagonal(&self) -> f64 {
        let Some(first) = self.points.first() else {
            return 0.0;
        };
        let (mut lo, mut hi) = (first.coords, first.coords);
        for p in &self.points[1..] {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        (hi - lo).norm()
    }

    /// SHA-256 over the little-endian bytes of every coordinate, points then normals.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.points {
            for c in p.coords.iter() {
                hasher.update(c.to_le_bytes());
            }
        }
        for n in &self.normals {
            for c in n.iter() {
                hasher.update(c.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Removes points lying within `tol` of an earlier retained point.
    ///
    /// The first occurrence wins and the relative order of survivors is
    /// preserved. With `tol == 0` only exact duplicates are removed.
    pub fn dedup(&self, tol: f64) -> (PointCloud, usize) {
        let keep = if tol > 0.0 {
            dedup_within(&self.points, tol)
        } else {
            dedup_exact(&self.points)
        };
        let mut points = Vec::with_capacity(keep.len());
        let mut normals = Vec::with_capacity(keep.len());
        for &i in &keep {
            points.push(self.points[i]);
            normals.push(self.normals[i]);
        }
        let removed = self.len() - keep.len();
        (PointCloud { points, normals }, removed)
    }
}

fn exact_key(p: &Point3<f64>) -> [u64; 3] {
    // +0.0 and -0.0 are the same position
    [p.x, p.y, p.z].map(|c| (c + 0.0).to_bits())
}

fn dedup_exact(points: &[Point3<f64>]) -> Vec<usize> {
    let mut seen = HashMap::with_capacity(points.len());
    (0..points.len())
        .filter(|&i| seen.insert(exact_key(&points[i]), i).is_none())
        .collect()
}

fn dedup_within(points: &[Point3<f64>], tol: f64) -> Vec<usize> {
    let cell = |p: &Point3<f64>| -> [i64; 3] { [p.x, p.y, p.z].map(|c| (c / tol).floor() as i64) };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut keep = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let c = cell(p);
        let mut clash = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [
                        c[0].saturating_add(dx),
                        c[1].saturating_add(dy),
                        c[2].saturating_add(dz),
                    ];
                    if let Some(bucket) = grid.get(&key) {
                        if bucket.iter().any(|&j| (points[j] - p).norm() <= tol) {
                            clash = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !clash {
            grid.entry(c).or_default().push(i);
            keep.push(i);
        }
    }
    keep
}

/// On-disk formats understood by the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    PlyBinaryLe,
}

impl MeshFormat {
    /// Guesses the format from the file extension; PLY variants are resolved from the header.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::PlyBinaryLe),
            _ => None,
        }
    }
}

/// Geometry read from disk: positions, optional per-vertex normals and optional faces.
#[derive(Debug, Clone, Default)]
pub struct Geometry {
    pub vertices: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub faces: Vec<[usize; 3]>,
}

impl Geometry {
    pub fn mesh(&self) -> Result<TriangleMesh> {
        TriangleMesh::new(self.vertices.clone(), self.faces.clone())
    }

    /// Stored normals when present, otherwise area-weighted vertex normals from the faces.
    pub fn to_cloud(&self) -> Result<PointCloud> {
        match &self.normals {
            Some(normals) => PointCloud::new(self.vertices.clone(), normals.clone()),
            None if !self.faces.is_empty() => self.mesh()?.to_cloud(),
            None => Err(Error::parse(
                "input",
                "file carries neither normals nor faces to derive them from",
            )),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a geometry file. OBJ is chosen by extension; anything else is parsed as PLY.
pub fn load_geometry(path: &Path) -> Result<Geometry> {
    let bytes = read_file(path)?;
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Obj) => {
            let (geometry, _) = parse_obj(&bytes[..])?;
            Ok(geometry)
        }
        _ => Ok(parse_ply(&bytes)?.into_geometry()),
    }
}

/// Loads a triangle mesh, validating faces.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let bytes = read_file(path)?;
    let geometry = match format {
        MeshFormat::Obj => parse_obj(&bytes[..])?.0,
        MeshFormat::PlyAscii | MeshFormat::PlyBinaryLe => {
            let data = parse_ply(&bytes)?;
            let declared = if format == MeshFormat::PlyAscii {
                PlyFormat::Ascii
            } else {
                PlyFormat::BinaryLittleEndian
            };
            if data.format != declared {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!("expected {declared:?} PLY, found {:?}", data.format),
                ));
            }
            data.into_geometry()
        }
    };
    geometry.mesh()
}

/// Loads a point cloud: stored normals if the file has them, else vertex normals of its faces.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    load_geometry(path)?.to_cloud()
}

/// Writes a cloud as PLY (`x y z nx ny nz`, doubles in binary mode).
pub fn save_cloud(cloud: &PointCloud, path: &Path, format: PlyFormat) -> Result<()> {
    let mut buf = Vec::new();
    write_ply(&mut buf, cloud.points(), Some(cloud.normals()), &[], format)
        .map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Ensures every normal has unit length, renormalizing in place.
pub fn renormalize(normals: &mut [Vector3<f64>]) {
    for n in normals {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
}
