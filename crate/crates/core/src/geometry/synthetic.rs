//! Deterministic test shapes with analytic normals.
//!
//! Every generator uses stratified (grid or spiral) sampling, so the output
//! depends only on the shape parameters.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use super::{PointCloud, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSpec {
    /// `nx × ny` grid in the z = 0 plane, normals +z.
    PlaneGrid { nx: usize, ny: usize, spacing: f64 },
    /// Evenly spaced points on the x axis. A line has no unique normal; +z is used.
    Line { samples: usize, spacing: f64 },
    /// Surface of an axis-aligned cube centred at the origin, `per_side²` cell centres per face.
    Cube { per_side: usize, size: f64 },
    /// Fibonacci spiral on a sphere centred at the origin, outward normals.
    Sphere { samples: usize, radius: f64 },
    /// Two half-planes sharing the y axis with interior angle `angle`,
    /// `per_side × per_side` samples each; outward normals meet at `π - angle`.
    Dihedral { per_side: usize, angle: f64, spacing: f64 },
    /// Cell centres of a grid restricted to a ball, normals radial.
    Ball { per_axis: usize, radius: f64 },
}

impl ShapeSpec {
    /// A shape by name with roughly `samples` points.
    ///
    /// Names: `plane`, `line`, `cube`, `sphere`, `dihedral` (right angle), `ball`.
    pub fn from_name(name: &str, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::TooFewSamples(samples));
        }
        let side = |n: usize| ((n as f64).sqrt().round() as usize).max(1);
        Ok(match name {
            "plane" => ShapeSpec::PlaneGrid {
                nx: side(samples),
                ny: side(samples),
                spacing: 1.0,
            },
            "line" => ShapeSpec::Line {
                samples,
                spacing: 1.0,
            },
            "cube" => ShapeSpec::Cube {
                per_side: side(samples / 6),
                size: 1.0,
            },
            "sphere" => ShapeSpec::Sphere {
                samples,
                radius: 1.0,
            },
            "dihedral" => ShapeSpec::Dihedral {
                per_side: side(samples / 2),
                angle: PI / 2.0,
                spacing: 1.0,
            },
            "ball" => {
                let m = (6.0 * samples as f64 / PI).cbrt().round() as usize;
                ShapeSpec::Ball {
                    per_axis: (m + m % 2).max(2),
                    radius: 1.0,
                }
            }
            other => return Err(Error::InvalidShape(format!("unknown shape '{other}'"))),
        })
    }

    fn expected_count(&self) -> usize {
        match *self {
            ShapeSpec::PlaneGrid { nx, ny, .. } => nx * ny,
            ShapeSpec::Line { samples, .. } | ShapeSpec::Sphere { samples, .. } => samples,
            ShapeSpec::Cube { per_side, .. } => 6 * per_side * per_side,
            ShapeSpec::Dihedral { per_side, .. } => 2 * per_side * per_side,
            ShapeSpec::Ball { per_axis, .. } => per_axis.pow(3),
        }
    }
}

/// Samples `spec` into a point cloud with exact analytic normals.
pub fn generate_synthetic(spec: &ShapeSpec) -> Result<PointCloud> {
    if spec.expected_count() < 2 {
        return Err(Error::TooFewSamples(spec.expected_count()));
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    match *spec {
        ShapeSpec::PlaneGrid { nx, ny, spacing } => {
            for j in 0..ny {
                for i in 0..nx {
                    points.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
                    normals.push(Vector3::z());
                }
            }
        }
        ShapeSpec::Line { samples, spacing } => {
            for i in 0..samples {
                points.push(Point3::new(i as f64 * spacing, 0.0, 0.0));
                normals.push(Vector3::z());
            }
        }
        ShapeSpec::Cube { per_side, size } => {
            let h = size / per_side as f64;
            let half = size / 2.0;
            for (axis, sign) in faces() {
                let (u, v) = tangents(axis, sign);
                let normal = sign * axis_vector(axis);
                for j in 0..per_side {
                    for i in 0..per_side {
                        let a = -half + (i as f64 + 0.5) * h;
                        let b = -half + (j as f64 + 0.5) * h;
                        let p = normal * half + axis_vector(u) * a + axis_vector(v) * b;
                        points.push(Point3::from(p));
                        normals.push(normal);
                    }
                }
            }
        }
        ShapeSpec::Sphere { samples, radius } => {
            let golden = PI * (3.0 - 5f64.sqrt());
            for i in 0..samples {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / samples as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                let n = Vector3::new(r * phi.cos(), r * phi.sin(), z).normalize();
                points.push(Point3::from(n * radius));
                normals.push(n);
            }
        }
        ShapeSpec::Dihedral {
            per_side,
            angle,
            spacing,
        } => {
            if !(angle > 0.0 && angle < PI) {
                return Err(Error::InvalidShape(format!(
                    "dihedral angle {angle} must lie in (0, pi)"
                )));
            }
            let dir_a = Vector3::x();
            let dir_b = Vector3::new(angle.cos(), 0.0, angle.sin());
            let normal_a = -Vector3::z();
            let normal_b = Vector3::new(-angle.sin(), 0.0, angle.cos());
            for (dir, normal) in [(dir_a, normal_a), (dir_b, normal_b)] {
                for j in 0..per_side {
                    for i in 0..per_side {
                        let d = (i as f64 + 0.5) * spacing;
                        let y = j as f64 * spacing;
                        points.push(Point3::from(dir * d + Vector3::y() * y));
                        normals.push(normal);
                    }
                }
            }
        }
        ShapeSpec::Ball { per_axis, radius } => {
            let h = 2.0 * radius / per_axis as f64;
            let coord = |i: usize| -radius + (i as f64 + 0.5) * h;
            for k in 0..per_axis {
                for j in 0..per_axis {
                    for i in 0..per_axis {
                        let p = Vector3::new(coord(i), coord(j), coord(k));
                        let len = p.norm();
                        if len <= radius && len > 0.0 {
                            points.push(Point3::from(p));
                            normals.push(p / len);
                        }
                    }
                }
            }
            if points.len() < 2 {
                return Err(Error::TooFewSamples(points.len()));
            }
        }
    }
    PointCloud::new(points, normals)
}

fn faces() -> [(usize, f64); 6] {
    [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)]
}

fn axis_vector(axis: usize) -> Vector3<f64> {
    let mut v = Vector3::zeros();
    v[axis] = 1.0;
    v
}

/// Tangent axes `(u, v)` with `e_u × e_v = sign · e_axis`.
fn tangents(axis: usize, sign: f64) -> (usize, usize) {
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    if sign > 0.0 {
        (u, v)
    } else {
        (v, u)
    }
}

/// Triangulated surface of the cube `[-size/2, size/2]³`, with each face split
/// into `subdivisions²` quads and shared vertices along edges. Faces are
/// oriented outward. The vertex count is `6·s² + 2`.
pub fn cube_mesh(subdivisions: usize, size: f64) -> Result<TriangleMesh> {
    if subdivisions == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let m = subdivisions;
    let h = size / m as f64;
    let half = size / 2.0;
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |lattice: [usize; 3]| -> usize {
        *index.entry(lattice).or_insert_with(|| {
            vertices.push(Point3::new(
                -half + lattice[0] as f64 * h,
                -half + lattice[1] as f64 * h,
                -half + lattice[2] as f64 * h,
            ));
            vertices.len() - 1
        })
    };
    let mut faces_out = Vec::with_capacity(12 * m * m);
    for (axis, sign) in faces() {
        let (u, v) = tangents(axis, sign);
        let level = if sign > 0.0 { m } else { 0 };
        let at = |a: usize, b: usize| {
            let mut l = [0usize; 3];
            l[axis] = level;
            l[u] = a;
            l[v] = b;
            l
        };
        for j in 0..m {
            for i in 0..m {
                let a = vertex(at(i, j));
                let b = vertex(at(i + 1, j));
                let c = vertex(at(i + 1, j + 1));
                let d = vertex(at(i, j + 1));
                faces_out.push([a, b, c]);
                faces_out.push([a, c, d]);
            }
        }
    }
    TriangleMesh::new(vertices, faces_out)
}
