//! Procedural articulated body + hand template with forward kinematics and
//! linear blend skinning.

mod fk;
mod io;
mod pose;
mod template;
pub mod tree;

pub use fk::SkeletonJoint;
pub use io::{
    load_template, save_template, template_from_bytes, template_to_bytes, TEMPLATE_MAGIC,
    TEMPLATE_VERSION,
};
pub use pose::{BodyShape, FingerDofs, HandGraspParams, PoseVector, SHAPE_MAX, SHAPE_MIN};
pub use template::{hand_joint_name, hand_joint_parent, BodyModel, HandModel, SkinVertex};
pub use tree::{
    finger_axes, KinematicTree, Side, ABD_MAX, BODY_JOINTS, FLEX_MAX, GRASP_DIM, HAND_DOF,
    HAND_JOINTS, POSE_DIM, TOTAL_JOINTS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BodyError {
    #[error("{what} must have {want} entries, got {got}")]
    BadDimension {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("joint {joint} has a degenerate rotation block: {source}")]
    BadBlock {
        joint: usize,
        source: crate::geom::GeomError,
    },
    #[error("shape slot {slot} out of range [0.8, 1.2]: {value}")]
    BadShape { slot: usize, value: f64 },
    #[error("hand model is {want:?}, params are {got:?}")]
    SideMismatch { want: tree::Side, got: tree::Side },
    #[error("corrupt template: {0}")]
    CorruptTemplate(String),
    #[error(transparent)]
    Geometry(#[from] crate::geom::GeomError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
