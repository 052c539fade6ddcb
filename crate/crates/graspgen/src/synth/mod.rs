//! Procedural training-data oracles: IK-based reaching body poses with
//! gaze/lean heuristics, finger-closure hand grasps with contact counting,
//! and reproducible line-delimited corpus files.

mod closure;
mod corpus;
mod objects;
mod reach;

pub use closure::{
    gen_closure_grasp, gen_closure_grasp_at, ClosureGrasp, StopReason, CLOSURE_STEP,
    CONTACT_EPS, PALM_STANDOFF,
};
pub use corpus::{
    filter_corpus, read_ldjson, synth_grasp_corpus, synth_pose_corpus, write_ldjson,
    ContactCount, GraspCorpusConfig, GraspRecord, PoseCorpusConfig, PoseRecord,
    MIN_CONTACTS_DEFAULT,
};
pub use objects::{
    procedural_object, ObjectKind, OBJECT_KINDS, OBJECT_MAX_RADIUS, OBJECT_MIN_RADIUS,
};
pub use reach::{gen_reach_pose, gen_reach_pose_with, ReachPose, REACH_BOX};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(
        "reach target ({0:.3}, {1:.3}, {2:.3}) m outside the supported workspace \
         [{lo_x:.1},{hi_x:.1}]x[{lo_y:.1},{hi_y:.1}]x[{lo_z:.1},{hi_z:.1}]",
        lo_x = REACH_BOX[0].0, hi_x = REACH_BOX[0].1,
        lo_y = REACH_BOX[1].0, hi_y = REACH_BOX[1].1,
        lo_z = REACH_BOX[2].0, hi_z = REACH_BOX[2].1
    )]
    OutOfRange(f64, f64, f64),
    #[error("object bounding radius {0:.4} m exceeds the graspable maximum {OBJECT_MAX_RADIUS} m")]
    ObjectTooLarge(f64),
    #[error("object bounding radius {0:.4} m is below the graspable minimum {OBJECT_MIN_RADIUS} m")]
    ObjectTooSmall(f64),
    #[error("body template: {0}")]
    Body(#[from] crate::body::BodyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus record: {0}")]
    Json(#[from] serde_json::Error),
}
