use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::{shapes, TriMesh};

/// Graspable object size limits (bounding-sphere radius, meters).
pub const OBJECT_MIN_RADIUS: f64 = 0.01;
pub const OBJECT_MAX_RADIUS: f64 = 0.12;

/// The three procedural object families used for corpus synthesis and
/// evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Sphere,
    Box,
    Cylinder,
}

pub const OBJECT_KINDS: [ObjectKind; 3] = [ObjectKind::Sphere, ObjectKind::Box, ObjectKind::Cylinder];

impl ObjectKind {
    pub fn label(self) -> &'static str {
        match self {
            ObjectKind::Sphere => "sphere",
            ObjectKind::Box => "box",
            ObjectKind::Cylinder => "cylinder",
        }
    }
}

impl std::str::FromStr for ObjectKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(ObjectKind::Sphere),
            "box" => Ok(ObjectKind::Box),
            "cylinder" => Ok(ObjectKind::Cylinder),
            other => Err(format!("unknown object kind `{other}`")),
        }
    }
}

/// Build a procedural object centered at the origin whose bounding-sphere
/// radius equals `radius` (up to faceting). Proportions are fixed per kind
/// so `(kind, radius)` fully determines the mesh.
pub fn procedural_object(kind: ObjectKind, radius: f64) -> TriMesh {
    match kind {
        ObjectKind::Sphere => shapes::icosphere(radius, 2),
        ObjectKind::Box => {
            // Corner-to-center distance = radius.
            let p = Vector3::new(1.0, 0.72, 0.45);
            let he = p * (radius / p.norm());
            shapes::box_mesh(he)
        }
        ObjectKind::Cylinder => {
            // Rim-to-center distance = radius.
            let r = 0.55 * radius;
            let half_h = (radius * radius - r * r).sqrt();
            shapes::cylinder(r, 2.0 * half_h, 24)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounding_radius_matches_request() {
        for kind in OBJECT_KINDS {
            for radius in [0.015, 0.03, 0.06, 0.11] {
                let mesh = procedural_object(kind, radius);
                let (center, r) = mesh.bounding_sphere();
                assert!(
                    (r - radius).abs() < 0.07 * radius,
                    "{} radius {radius}: bounding sphere {r}",
                    kind.label()
                );
                assert!(center.coords.norm() < 0.05 * radius, "{}: off-center", kind.label());
                mesh.validate().unwrap();
            }
        }
    }

    #[test]
    fn kinds_are_distinct_geometry() {
        let s = procedural_object(ObjectKind::Sphere, 0.05);
        let b = procedural_object(ObjectKind::Box, 0.05);
        let c = procedural_object(ObjectKind::Cylinder, 0.05);
        assert_ne!(s.vertices.len(), b.vertices.len());
        assert_ne!(b.vertices.len(), c.vertices.len());
    }
}
