//! Procedural primitive meshes. All factories produce closed, outward-wound
//! triangle meshes and are fully deterministic.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use super::TriMesh;

/// Icosphere centered at the origin.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let mut vertices: Vec<Point3<f64>> = raw
        .iter()
        .map(|&(x, y, z)| {
            let v = Vector3::new(x, y, z).normalize() * radius;
            Point3::from(v)
        })
        .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (vertices[a].coords + vertices[b].coords) / 2.0;
                vertices.push(Point3::from(m.normalize() * radius));
                vertices.len() - 1
            })
        };
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriMesh::new(vertices, faces)
}

/// Axis-aligned box centered at the origin with the given half extents.
pub fn box_mesh(half_extents: Vector3<f64>) -> TriMesh {
    let (x, y, z) = (half_extents.x, half_extents.y, half_extents.z);
    let vertices = vec![
        Point3::new(-x, -y, -z),
        Point3::new(x, -y, -z),
        Point3::new(x, y, -z),
        Point3::new(-x, y, -z),
        Point3::new(-x, -y, z),
        Point3::new(x, -y, z),
        Point3::new(x, y, z),
        Point3::new(-x, y, z),
    ];
    let faces = vec![
        [0, 3, 2],
        [0, 2, 1],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [3, 7, 6],
        [3, 6, 2],
        [0, 4, 7],
        [0, 7, 3],
        [1, 2, 6],
        [1, 6, 5],
    ];
    TriMesh::new(vertices, faces)
}

/// Closed cylinder along the y axis, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
    assert!(segments >= 3);
    let h = height / 2.0;
    let mut vertices = Vec::with_capacity(segments * 2 + 2);
    for &y in &[-h, h] {
        for k in 0..segments {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            vertices.push(Point3::new(radius * theta.sin(), y, radius * theta.cos()));
        }
    }
    let bottom_center = vertices.len();
    vertices.push(Point3::new(0.0, -h, 0.0));
    let top_center = vertices.len();
    vertices.push(Point3::new(0.0, h, 0.0));

    let mut faces = Vec::with_capacity(segments * 4);
    for k in 0..segments {
        let k1 = (k + 1) % segments;
        let (l0, l1) = (k, k1);
        let (u0, u1) = (segments + k, segments + k1);
        faces.push([l0, l1, u1]);
        faces.push([l0, u1, u0]);
        faces.push([bottom_center, l1, l0]);
        faces.push([top_center, u0, u1]);
    }
    TriMesh::new(vertices, faces)
}

/// Capsule: a cylinder of the given radius around segment `a`→`b`, closed by
/// hemispherical caps. `segments` is the count around the axis, `rings` the
/// latitude steps per hemisphere.
pub fn capsule(a: Point3<f64>, b: Point3<f64>, radius: f64, segments: usize, rings: usize) -> TriMesh {
    // Interior shaft rings keep surface sampling roughly isotropic on long
    // thin capsules instead of leaving the cylinder wall vertex-free.
    let len = (b - a).norm();
    let shaft = if len < 1e-12 {
        0
    } else {
        ((len / (radius * 1.2)).ceil() as usize).saturating_sub(1).min(12)
    };
    capsule_with_shaft(a, b, radius, segments, rings, shaft)
}

/// [`capsule`] with an explicit interior ring count along the cylinder wall,
/// for callers that need a specific surface sampling density.
pub fn capsule_with_shaft(
    a: Point3<f64>,
    b: Point3<f64>,
    radius: f64,
    segments: usize,
    rings: usize,
    shaft: usize,
) -> TriMesh {
    assert!(segments >= 3 && rings >= 1);
    let axis_vec = b - a;
    let len = axis_vec.norm();
    let axis = if len < 1e-12 { Vector3::y() } else { axis_vec / len };
    let reference = if axis.x.abs() > 0.9 { Vector3::y() } else { Vector3::x() };
    let u = (reference - axis * axis.dot(&reference)).normalize();
    let v = axis.cross(&u);

    let ring_at = |center: Point3<f64>, phi: f64, out: &mut Vec<Point3<f64>>| {
        let (rho, lift) = (radius * phi.cos(), radius * phi.sin());
        for k in 0..segments {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            out.push(center + u * (rho * theta.cos()) + v * (rho * theta.sin()) + axis * lift);
        }
    };

    let mut vertices = Vec::new();
    let bottom_pole = 0;
    vertices.push(a - axis * radius);
    // Bottom hemisphere rings: phi from just above -pi/2 up to the equator.
    for j in 1..=rings {
        let phi = -std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_2 * j as f64 / rings as f64;
        ring_at(a, phi, &mut vertices);
    }
    for j in 1..=shaft {
        let t = j as f64 / (shaft + 1) as f64;
        ring_at(a + axis_vec * t, 0.0, &mut vertices);
    }
    // Top hemisphere rings: equator up to just below pi/2.
    for j in 0..rings {
        let phi = std::f64::consts::FRAC_PI_2 * j as f64 / rings as f64;
        ring_at(b, phi, &mut vertices);
    }
    let top_pole = vertices.len();
    vertices.push(b + axis * radius);

    let total_rings = 2 * rings + shaft;
    let ring_start = |j: usize| 1 + j * segments;
    let mut faces = Vec::new();
    for k in 0..segments {
        let k1 = (k + 1) % segments;
        faces.push([bottom_pole, ring_start(0) + k1, ring_start(0) + k]);
        faces.push([top_pole, ring_start(total_rings - 1) + k, ring_start(total_rings - 1) + k1]);
    }
    for j in 0..(total_rings - 1) {
        let (lo, hi) = (ring_start(j), ring_start(j + 1));
        for k in 0..segments {
            let k1 = (k + 1) % segments;
            faces.push([lo + k, lo + k1, hi + k1]);
            faces.push([lo + k, hi + k1, hi + k]);
        }
    }
    TriMesh::new(vertices, faces)
}
