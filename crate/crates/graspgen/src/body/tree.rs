use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Body joints (pelvis root + 21 articulated joints).
pub const BODY_JOINTS: usize = 22;
/// Finger joints per hand (5 fingers × 3 phalanges).
pub const HAND_JOINTS: usize = 15;
/// Full skeleton: body + both hands.
pub const TOTAL_JOINTS: usize = BODY_JOINTS + 2 * HAND_JOINTS;
/// Pose vector dimensionality: 22 joints × 6-d rotation blocks.
pub const POSE_DIM: usize = BODY_JOINTS * 6;
/// Hand grasp parameter dimensionality: 15×6 finger blocks + t_h + R_h.
pub const GRASP_DIM: usize = HAND_JOINTS * 6 + 3 + 6;
/// Articulated hinge DOF per hand: 5 × (proximal flex+abduction, middle
/// flex, distal flex).
pub const HAND_DOF: usize = 20;

pub const PELVIS: usize = 0;
pub const SPINE3: usize = 3;
pub const NECK: usize = 4;
pub const HEAD: usize = 5;
pub const LEFT_COLLAR: usize = 6;
pub const LEFT_SHOULDER: usize = 7;
pub const LEFT_ELBOW: usize = 8;
pub const LEFT_WRIST: usize = 9;
pub const RIGHT_COLLAR: usize = 10;
pub const RIGHT_SHOULDER: usize = 11;
pub const RIGHT_ELBOW: usize = 12;
pub const RIGHT_WRIST: usize = 13;
pub const LEFT_HIP: usize = 14;
pub const RIGHT_HIP: usize = 18;
/// First left-hand joint in the full skeleton.
pub const LEFT_HAND_BASE: usize = BODY_JOINTS;
/// First right-hand joint in the full skeleton.
pub const RIGHT_HAND_BASE: usize = BODY_JOINTS + HAND_JOINTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn wrist(self) -> usize {
        match self {
            Side::Left => LEFT_WRIST,
            Side::Right => RIGHT_WRIST,
        }
    }

    pub fn hand_base(self) -> usize {
        match self {
            Side::Left => LEFT_HAND_BASE,
            Side::Right => RIGHT_HAND_BASE,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// Sign of the x half-space this side occupies (+x is the body's right).
    pub fn x_sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Names for the 22 body joints, in canonical index order.
pub const BODY_JOINT_NAMES: [&str; BODY_JOINTS] = [
    "pelvis",
    "spine1",
    "spine2",
    "spine3",
    "neck",
    "head",
    "left_collar",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_collar",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_hip",
    "left_knee",
    "left_ankle",
    "left_foot",
    "right_hip",
    "right_knee",
    "right_ankle",
    "right_foot",
];

pub const FINGER_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

/// Static description of one finger of the canonical right hand, in the
/// hand-local frame (+x distal, +y back of hand, +z thumb side).
#[derive(Debug, Clone, Copy)]
pub struct FingerSpec {
    pub name: &'static str,
    /// Knuckle position relative to the wrist.
    pub mcp: [f64; 3],
    /// Unit direction the straight finger points along.
    pub dir: [f64; 3],
    /// Proximal, middle, distal phalanx lengths (meters).
    pub lengths: [f64; 3],
    /// Capsule radius (meters).
    pub radius: f64,
}

/// Right-hand finger layout. The left hand is the x-mirror of this table.
pub const FINGERS: [FingerSpec; 5] = [
    FingerSpec {
        name: "thumb",
        mcp: [0.025, -0.008, 0.030],
        dir: [0.5879747, -0.1069045, 0.8017837],
        lengths: [0.040, 0.032, 0.025],
        radius: 0.009,
    },
    FingerSpec {
        name: "index",
        mcp: [0.092, -0.018, 0.027],
        dir: [1.0, 0.0, 0.0],
        lengths: [0.042, 0.025, 0.020],
        radius: 0.008,
    },
    FingerSpec {
        name: "middle",
        mcp: [0.095, -0.018, 0.009],
        dir: [1.0, 0.0, 0.0],
        lengths: [0.046, 0.028, 0.022],
        radius: 0.008,
    },
    FingerSpec {
        name: "ring",
        mcp: [0.092, -0.018, -0.009],
        dir: [1.0, 0.0, 0.0],
        lengths: [0.042, 0.026, 0.020],
        radius: 0.0075,
    },
    FingerSpec {
        name: "pinky",
        mcp: [0.085, -0.018, -0.022],
        dir: [1.0, 0.0, 0.0],
        lengths: [0.032, 0.020, 0.017],
        radius: 0.007,
    },
];

/// Palm capsule of the canonical right hand (wrist-local).
pub const PALM_AXIS_START: [f64; 3] = [0.010, 0.0, 0.0];
pub const PALM_AXIS_END: [f64; 3] = [0.075, 0.0, 0.0];
pub const PALM_RADIUS: f64 = 0.030;
/// Vertices within this distance of the inner-face tangent plane form the
/// palm vertex group.
pub const PALM_FACE_BAND: f64 = 0.015;

/// Hinge limits: flexion in [0°, 100°], abduction in ±15°.
pub const FLEX_MIN: f64 = 0.0;
pub const FLEX_MAX: f64 = 100.0 * std::f64::consts::PI / 180.0;
pub const ABD_MAX: f64 = 15.0 * std::f64::consts::PI / 180.0;

/// One joint of the kinematic tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Parent joint index; `None` only for the pelvis root.
    pub parent: Option<usize>,
    /// Rest offset from the parent joint, in the parent frame, meters,
    /// already scaled by the body shape.
    pub offset: [f64; 3],
}

/// The 52-joint skeleton (22 body + 15 per hand), topologically sorted so
/// every parent precedes its children.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinematicTree {
    pub joints: Vec<Joint>,
}

impl KinematicTree {
    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn offset(&self, j: usize) -> Vector3<f64> {
        let o = self.joints[j].offset;
        Vector3::new(o[0], o[1], o[2])
    }

    /// Rest-pose joint positions (root at the origin).
    pub fn rest_positions(&self) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); self.joints.len()];
        for (i, j) in self.joints.iter().enumerate() {
            out[i] = match j.parent {
                Some(p) => out[p] + self.offset(i),
                None => self.offset(i),
            };
        }
        out
    }

    /// True when `ancestor` lies on the parent chain of `j` (inclusive).
    pub fn is_descendant(&self, j: usize, ancestor: usize) -> bool {
        let mut cur = Some(j);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.joints[c].parent;
        }
        false
    }
}

/// Hinge axes for one finger, in the hand-local frame of the given side.
#[derive(Debug, Clone, Copy)]
pub struct FingerAxes {
    pub flex: Vector3<f64>,
    pub abduct: Vector3<f64>,
}

/// Axes for all five fingers of one hand. For the right hand, flexion of
/// the four fingers is about −z (curling +x toward −y, the palm side);
/// mirroring flips both axes' handedness.
pub fn finger_axes(side: Side) -> [FingerAxes; 5] {
    let mut out = [FingerAxes {
        flex: Vector3::zeros(),
        abduct: Vector3::zeros(),
    }; 5];
    for (fi, spec) in FINGERS.iter().enumerate() {
        let dir = Vector3::new(spec.dir[0], spec.dir[1], spec.dir[2]);
        // Right-hand flexion axis: curls the finger direction toward the
        // palm normal (−y). For straight fingers this is −z.
        let flex_r = dir.cross(&-Vector3::y()).normalize();
        let abd_r = Vector3::y();
        match side {
            Side::Right => {
                out[fi] = FingerAxes { flex: flex_r, abduct: abd_r };
            }
            Side::Left => {
                // Mirror across x=0: Rot(a,θ) ↦ Rot(−Ma, θ).
                let m = Vector3::new(-1.0, 1.0, 1.0);
                out[fi] = FingerAxes {
                    flex: -flex_r.component_mul(&m),
                    abduct: -abd_r.component_mul(&m),
                };
            }
        }
    }
    out
}

/// Mirror a right-hand-local point into the left-hand frame.
pub fn mirror_x(v: [f64; 3]) -> [f64; 3] {
    [-v[0], v[1], v[2]]
}
