//! Rotation representations, rigid transforms, triangle meshes,
//! point–mesh queries, and basis-point-set encoding.

mod bps;
pub(crate) mod distance;
mod kabsch;
mod mesh;
mod obj;
mod rot;
pub mod shapes;
mod transform;

pub use bps::{BpsBasis, BPS_POINTS, BPS_RADIUS};
pub use distance::{
    closest_point_on_triangle, mesh_contains_point, point_mesh_distance, segment_distance,
    signed_mesh_distance, MeshHit, MeshQueryAccel,
};
pub use kabsch::{kabsch, weighted_kabsch};
pub use mesh::TriMesh;
pub use obj::{load_obj, load_vertex_groups, save_obj};
pub use rot::{
    axis_angle_to_matrix, axis_angle_to_rot6d, matrix_to_axis_angle, Rotation6D, DEGENERACY_EPS,
};
pub use transform::{AffineTransform, RigidTransform};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("degenerate rotation input: {0}")]
    DegenerateRotation(String),
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),
    #[error("vertex group `{0}` not found")]
    MissingGroup(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
