use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use super::{AffineTransform, GeomError, RigidTransform};

/// Indexed triangle mesh with named vertex groups.
///
/// Vertex groups are kept in a BTreeMap so that serialization and
/// iteration order are stable across runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub groups: BTreeMap<String, Vec<usize>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            faces,
            groups: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.faces.is_empty() {
            return Err(GeomError::EmptyMesh);
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(GeomError::InvalidMesh(format!(
                        "face {fi} references vertex {v} but mesh has {n} vertices"
                    )));
                }
            }
        }
        for (name, idxs) in &self.groups {
            for &v in idxs {
                if v >= n {
                    return Err(GeomError::InvalidMesh(format!(
                        "group `{name}` references vertex {v} but mesh has {n} vertices"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn face_normal(&self, fi: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[fi];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 1e-15 {
            Vector3::zeros()
        } else {
            n / len
        }
    }

    /// Area-weighted per-vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            let n = (b - a).cross(&(c - a)); // magnitude = 2 * area
            for &v in f {
                normals[v] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 1e-15 {
                *n /= len;
            }
        }
        normals
    }

    pub fn centroid(&self) -> Point3<f64> {
        let mut acc = Vector3::zeros();
        for v in &self.vertices {
            acc += v.coords;
        }
        Point3::from(acc / self.vertices.len().max(1) as f64)
    }

    pub fn aabb(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Smallest sphere centered at the centroid that encloses the mesh.
    pub fn bounding_sphere(&self) -> (Point3<f64>, f64) {
        let c = self.centroid();
        let r = self
            .vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max);
        (c, r)
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            faces: self.faces.clone(),
            groups: self.groups.clone(),
        }
    }

    /// Apply a general affine map. When the linear part flips orientation
    /// (negative determinant), face winding is reversed to keep outward
    /// normals outward.
    pub fn transformed_affine(&self, t: &AffineTransform) -> TriMesh {
        let flip = t.linear_matrix().determinant() < 0.0;
        let faces = if flip {
            self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect()
        } else {
            self.faces.clone()
        };
        TriMesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            faces,
            groups: self.groups.clone(),
        }
    }

    /// Append another mesh in place; returns the vertex offset at which the
    /// appended mesh's vertices begin. Group names collide by merging.
    pub fn append(&mut self, other: &TriMesh) -> usize {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        for (name, idxs) in &other.groups {
            let entry = self.groups.entry(name.clone()).or_default();
            entry.extend(idxs.iter().map(|&i| i + off));
        }
        off
    }

    pub fn group(&self, name: &str) -> Result<&[usize], GeomError> {
        self.groups
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| GeomError::MissingGroup(name.to_string()))
    }

    /// Total surface area.
    pub fn area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
                (b - a).cross(&(c - a)).norm() * 0.5
            })
            .sum()
    }
}
