use nalgebra::{Point3, Vector3};

use super::TriMesh;

/// Result of a point-to-mesh surface query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHit {
    /// Unsigned distance to the surface.
    pub distance: f64,
    /// Index of the face realizing the minimum.
    pub face: usize,
    /// Closest point on that face.
    pub point: Point3<f64>,
}

/// Closest point on triangle `abc` to `p` (Voronoi-region classification).
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Distance from `p` to segment `ab`.
pub fn segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    let t = if denom < 1e-18 {
        0.0
    } else {
        ((p - a).dot(&ab) / denom).clamp(0.0, 1.0)
    };
    ((a + ab * t) - p).norm()
}

/// Brute-force point-to-surface query over every face.
pub fn point_mesh_distance(mesh: &TriMesh, p: &Point3<f64>) -> MeshHit {
    assert!(!mesh.faces.is_empty(), "distance query on empty mesh");
    let mut best = MeshHit {
        distance: f64::INFINITY,
        face: 0,
        point: *p,
    };
    for (fi, f) in mesh.faces.iter().enumerate() {
        let cp = closest_point_on_triangle(
            p,
            &mesh.vertices[f[0]],
            &mesh.vertices[f[1]],
            &mesh.vertices[f[2]],
        );
        let d = (cp - p).norm();
        if d < best.distance {
            best = MeshHit {
                distance: d,
                face: fi,
                point: cp,
            };
        }
    }
    best
}

/// Möller–Trumbore ray/triangle intersection. Returns `(t, u, v)` on hit.
fn ray_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&h) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t <= 1e-12 {
        return None;
    }
    Some((t, u, v))
}

/// Ray-parity containment test for a closed mesh. Points on the surface
/// count as outside. Edge-grazing rays are detected and retried along a
/// different direction; the directions are fixed, so the result is
/// deterministic.
pub fn mesh_contains_point(mesh: &TriMesh, p: &Point3<f64>) -> bool {
    const DIRS: [[f64; 3]; 4] = [
        [0.538137754901, 0.717516906535, 0.442188687604],
        [-0.274791774455, 0.858235429078, -0.433651612216],
        [0.912870929175, -0.182574185835, 0.365148371670],
        [0.267261241912, 0.534522483825, -0.801783725737],
    ];
    let mut last_parity = false;
    for d in DIRS {
        let dir = Vector3::new(d[0], d[1], d[2]);
        let mut crossings = 0usize;
        let mut ambiguous = false;
        for f in &mesh.faces {
            if let Some((_t, u, v)) = ray_triangle(
                p,
                &dir,
                &mesh.vertices[f[0]],
                &mesh.vertices[f[1]],
                &mesh.vertices[f[2]],
            ) {
                let w = 1.0 - u - v;
                let margin = 1e-9;
                if u < margin || v < margin || w < margin {
                    ambiguous = true;
                    break;
                }
                crossings += 1;
            }
        }
        last_parity = crossings % 2 == 1;
        if !ambiguous {
            return last_parity;
        }
    }
    last_parity
}

/// Distance to the surface, negated when `p` is inside the mesh.
pub fn signed_mesh_distance(mesh: &TriMesh, p: &Point3<f64>) -> f64 {
    let hit = point_mesh_distance(mesh, p);
    if mesh_contains_point(mesh, p) {
        -hit.distance
    } else {
        hit.distance
    }
}

/// Precomputed per-face bounding boxes for repeated distance queries
/// against the same mesh. Queries prune faces whose box cannot beat the
/// current best, scanning in a deterministic order.
#[derive(Debug, Clone)]
pub struct MeshQueryAccel {
    mesh: TriMesh,
    face_lo: Vec<[f64; 3]>,
    face_hi: Vec<[f64; 3]>,
    centroid: Point3<f64>,
    radius: f64,
}

impl MeshQueryAccel {
    pub fn new(mesh: TriMesh) -> Self {
        let mut face_lo = Vec::with_capacity(mesh.faces.len());
        let mut face_hi = Vec::with_capacity(mesh.faces.len());
        for f in &mesh.faces {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &vi in f {
                let v = mesh.vertices[vi];
                for k in 0..3 {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
            face_lo.push(lo);
            face_hi.push(hi);
        }
        let (centroid, radius) = mesh.bounding_sphere();
        Self {
            mesh,
            face_lo,
            face_hi,
            centroid,
            radius,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Cheap lower bound on the surface distance: distance to the bounding
    /// sphere (0 when inside it).
    pub fn lower_bound(&self, p: &Point3<f64>) -> f64 {
        ((p - self.centroid).norm() - self.radius).max(0.0)
    }

    fn aabb_distance(lo: &[f64; 3], hi: &[f64; 3], p: &Point3<f64>) -> f64 {
        let mut acc = 0.0;
        for k in 0..3 {
            let d = if p[k] < lo[k] {
                lo[k] - p[k]
            } else if p[k] > hi[k] {
                p[k] - hi[k]
            } else {
                0.0
            };
            acc += d * d;
        }
        acc.sqrt()
    }

    pub fn distance(&self, p: &Point3<f64>) -> MeshHit {
        assert!(!self.mesh.faces.is_empty(), "distance query on empty mesh");
        let mut best = MeshHit {
            distance: f64::INFINITY,
            face: 0,
            point: *p,
        };
        for (fi, f) in self.mesh.faces.iter().enumerate() {
            if Self::aabb_distance(&self.face_lo[fi], &self.face_hi[fi], p) >= best.distance {
                continue;
            }
            let cp = closest_point_on_triangle(
                p,
                &self.mesh.vertices[f[0]],
                &self.mesh.vertices[f[1]],
                &self.mesh.vertices[f[2]],
            );
            let d = (cp - p).norm();
            if d < best.distance {
                best = MeshHit {
                    distance: d,
                    face: fi,
                    point: cp,
                };
            }
        }
        best
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        if (p - self.centroid).norm() > self.radius {
            return false;
        }
        mesh_contains_point(&self.mesh, p)
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        let hit = self.distance(p);
        if self.contains(p) {
            -hit.distance
        } else {
            hit.distance
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent reference: dense barycentric sampling of the triangle.
    fn grid_min_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
        let n = 200;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let u = i as f64 / n as f64;
                let v = j as f64 / n as f64;
                let w = 1.0 - u - v;
                let q = Point3::from(a.coords * w + b.coords * u + c.coords * v);
                best = best.min((q - p).norm());
            }
        }
        best
    }

    #[test]
    fn closest_point_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..60 {
            let mut pt = || {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            };
            let (a, b, c, p) = (pt(), pt(), pt(), pt());
            let cp = closest_point_on_triangle(&p, &a, &b, &c);
            let exact = (cp - p).norm();
            let sampled = grid_min_distance(&p, &a, &b, &c);
            // The sampled minimum can only overestimate the true one.
            assert!(exact <= sampled + 1e-9, "exact {exact} > sampled {sampled}");
            assert!(sampled - exact < 2e-2, "sampling should be close: {exact} vs {sampled}");
        }
    }

    #[test]
    fn closest_point_known_cases() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        // Above the interior: projects straight down.
        let cp = closest_point_on_triangle(&Point3::new(0.2, 0.2, 5.0), &a, &b, &c);
        assert_relative_eq!(cp, Point3::new(0.2, 0.2, 0.0), epsilon = 1e-12);
        // Beyond vertex b.
        let cp = closest_point_on_triangle(&Point3::new(2.0, -1.0, 0.0), &a, &b, &c);
        assert_relative_eq!(cp, b, epsilon = 1e-12);
        // Off the hypotenuse edge.
        let cp = closest_point_on_triangle(&Point3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert_relative_eq!(cp, Point3::new(0.5, 0.5, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn sphere_distance_is_radius_offset() {
        let sphere = shapes::icosphere(0.3, 3);
        let accel = MeshQueryAccel::new(sphere.clone());
        for (p, want) in [
            (Point3::new(0.9, 0.0, 0.0), 0.6),
            (Point3::new(0.0, -0.5, 0.0), 0.2),
            (Point3::new(0.0, 0.0, 0.0), 0.3),
        ] {
            let brute = point_mesh_distance(&sphere, &p);
            let fast = accel.distance(&p);
            // Chord flattening makes the polyhedron slightly smaller.
            assert_relative_eq!(brute.distance, want, epsilon = 3e-3);
            assert_relative_eq!(fast.distance, brute.distance, epsilon = 1e-12);
            assert_eq!(fast.face, brute.face);
        }
    }

    #[test]
    fn containment_on_box() {
        let bx = shapes::box_mesh(Vector3::new(0.1, 0.2, 0.3));
        assert!(mesh_contains_point(&bx, &Point3::new(0.0, 0.0, 0.0)));
        assert!(mesh_contains_point(&bx, &Point3::new(0.09, -0.19, 0.29)));
        assert!(!mesh_contains_point(&bx, &Point3::new(0.11, 0.0, 0.0)));
        assert!(!mesh_contains_point(&bx, &Point3::new(0.0, 0.0, 0.31)));
        assert!(!mesh_contains_point(&bx, &Point3::new(1.0, 1.0, 1.0)));
    }

    #[test]
    fn signed_distance_on_box_interior() {
        let bx = shapes::box_mesh(Vector3::new(0.1, 0.2, 0.3));
        let accel = MeshQueryAccel::new(bx);
        let p = Point3::new(0.05, 0.0, 0.0);
        assert_relative_eq!(accel.signed_distance(&p), -0.05, epsilon = 1e-12);
        let q = Point3::new(0.2, 0.0, 0.0);
        assert_relative_eq!(accel.signed_distance(&q), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn containment_random_points_vs_sphere_radius() {
        let sphere = shapes::icosphere(0.25, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let p: Point3<f64> = Point3::new(
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
            );
            let r = p.coords.norm();
            // Skip the shell where tessellation error decides.
            if (r - 0.25).abs() < 5e-3 {
                continue;
            }
            assert_eq!(mesh_contains_point(&sphere, &p), r < 0.25, "at radius {r}");
        }
    }

    #[test]
    fn accel_matches_brute_force_on_random_queries() {
        let cap = shapes::capsule(
            Point3::new(-0.1, 0.0, 0.05),
            Point3::new(0.2, 0.15, -0.1),
            0.04,
            12,
            4,
        );
        let accel = MeshQueryAccel::new(cap.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = Point3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let brute = point_mesh_distance(&cap, &p);
            let fast = accel.distance(&p);
            assert_relative_eq!(brute.distance, fast.distance, epsilon = 1e-12);
        }
    }
}
