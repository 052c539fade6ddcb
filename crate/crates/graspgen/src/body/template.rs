use nalgebra::{Matrix3, Point3, Vector3};

use super::pose::BodyShape;
use super::tree::{
    Joint, KinematicTree, Side, BODY_JOINTS, BODY_JOINT_NAMES, FINGERS, FINGER_NAMES, HAND_JOINTS,
    HEAD, LEFT_HAND_BASE, PALM_AXIS_END, PALM_AXIS_START, PALM_FACE_BAND, PALM_RADIUS,
    RIGHT_HAND_BASE, TOTAL_JOINTS,
};
use crate::geom::{shapes, AffineTransform, TriMesh};

/// Per-vertex skinning influences: up to 4 (joint, weight) pairs, weights
/// summing to 1. Unused slots hold weight 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinVertex {
    pub joints: [u32; 4],
    pub weights: [f64; 4],
}

impl SkinVertex {
    pub fn influence_count(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }
}

/// One hand template in its wrist-local frame (wrist at the origin; for the
/// right hand +x is distal, +y the back of the hand, +z the thumb side; the
/// left hand is the x-mirror). Skin joint ids 0..15 are the finger joints,
/// id 15 is the wrist root.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub side: Side,
    /// Rest mesh; vertex group "palm" marks the inner palm face.
    pub mesh: TriMesh,
    pub skin: Vec<SkinVertex>,
    /// Offset of each finger joint from its parent (proximal joints hang
    /// off the wrist).
    pub joint_offsets: Vec<[f64; 3]>,
    /// Fingertip offset in each distal joint's frame.
    pub fingertips: Vec<[f64; 3]>,
}

/// Skin joint id used for the wrist root inside a `HandModel`.
pub const HAND_WRIST_ID: u32 = HAND_JOINTS as u32;

/// Parent of a hand joint within the hand (None = wrist).
pub fn hand_joint_parent(j: usize) -> Option<usize> {
    match j % 3 {
        0 => None,
        _ => Some(j - 1),
    }
}

pub fn hand_joint_name(side: Side, j: usize) -> String {
    format!("{}_{}{}", side.label(), FINGER_NAMES[j / 3], j % 3 + 1)
}

/// Round through 32-bit precision so that build output and the serialized
/// template are bit-identical.
fn q32(x: f64) -> f64 {
    x as f32 as f64
}

fn quantize_mesh(mesh: &mut TriMesh) {
    for v in &mut mesh.vertices {
        v.x = q32(v.x);
        v.y = q32(v.y);
        v.z = q32(v.z);
    }
}

fn quantize_skin(skin: &mut [SkinVertex]) {
    for s in skin {
        for w in &mut s.weights {
            *w = q32(*w);
        }
    }
}

/// Two-nearest-segment inverse-distance weights.
/// Bind each vertex to its two nearest bones by inverse distance to the
/// bone *surface* (segment distance minus the bone's capsule radius). A
/// vertex sitting on a bone's own surface is effectively rigid to it, so
/// blending is confined to crease regions where two bone surfaces meet.
fn skin_to_segments(
    vertices: &[Point3<f64>],
    segments: &[(Point3<f64>, Point3<f64>, u32, f64)],
) -> Vec<SkinVertex> {
    vertices
        .iter()
        .map(|v| {
            let mut best: [(f64, u32); 2] = [(f64::INFINITY, 0), (f64::INFINITY, 0)];
            for &(a, b, joint, radius) in segments {
                let d = (crate::geom::segment_distance(v, &a, &b) - radius).max(1e-4);
                if d < best[0].0 {
                    best[1] = best[0];
                    best[0] = (d, joint);
                } else if d < best[1].0 {
                    best[1] = (d, joint);
                }
            }
            let w0 = 1.0 / best[0].0;
            let w1 = 1.0 / best[1].0;
            let sum = w0 + w1;
            SkinVertex {
                joints: [best[0].1, best[1].1, 0, 0],
                weights: [w0 / sum, w1 / sum, 0.0, 0.0],
            }
        })
        .collect()
}

impl HandModel {
    /// Build the hand template for one side under a body shape.
    pub fn build(side: Side, shape: &BodyShape) -> HandModel {
        let scale = shape.0[0] * shape.0[9];
        let girth = shape.0[0];

        // Geometry is authored for the right hand and mirrored at the end.
        let mut mesh = TriMesh::default();
        let palm_a = Point3::new(PALM_AXIS_START[0], PALM_AXIS_START[1], PALM_AXIS_START[2]) * scale;
        let palm_b = Point3::new(PALM_AXIS_END[0], PALM_AXIS_END[1], PALM_AXIS_END[2]) * scale;
        // The whole hand surface is sampled at a few millimeters so contact
        // tests against the 2 mm threshold resolve tangency patches instead
        // of isolated vertices.
        let palm_len = (palm_b - palm_a).norm();
        let palm_shaft = ((palm_len / 0.004).ceil() as usize).saturating_sub(1).min(16);
        let palm =
            shapes::capsule_with_shaft(palm_a, palm_b, PALM_RADIUS * girth, 28, 5, palm_shaft);
        let palm_count = palm.vertices.len();
        mesh.append(&palm);

        let mut joint_offsets = Vec::with_capacity(HAND_JOINTS);
        let mut fingertips = Vec::with_capacity(5);
        // Rest joint positions in the right-hand frame, for skinning.
        let mut segments: Vec<(Point3<f64>, Point3<f64>, u32, f64)> = vec![(
            palm_a,
            palm_b,
            HAND_WRIST_ID,
            PALM_RADIUS * girth,
        )];
        for (fi, spec) in FINGERS.iter().enumerate() {
            let mcp = Point3::new(spec.mcp[0], spec.mcp[1], spec.mcp[2]) * scale;
            let dir = Vector3::new(spec.dir[0], spec.dir[1], spec.dir[2]).normalize();
            let l = [
                spec.lengths[0] * scale,
                spec.lengths[1] * scale,
                spec.lengths[2] * scale,
            ];
            let p0 = mcp;
            let p1 = mcp + dir * l[0];
            let p2 = p1 + dir * l[1];
            let p3 = p2 + dir * l[2];
            let r = spec.radius * girth;

            mesh.append(&shapes::icosphere(r * 1.3, 2).transformed(
                &crate::geom::RigidTransform::from_translation(mcp.coords),
            ));
            let shaft_rings = |l: f64| ((l / 0.002).ceil() as usize).saturating_sub(1).min(24);
            mesh.append(&shapes::capsule_with_shaft(p0, p1, r, 20, 3, shaft_rings(l[0])));
            mesh.append(&shapes::capsule_with_shaft(p1, p2, r * 0.92, 20, 3, shaft_rings(l[1])));
            mesh.append(&shapes::capsule_with_shaft(p2, p3, r * 0.85, 20, 3, shaft_rings(l[2])));

            joint_offsets.push([p0.x, p0.y, p0.z]);
            let d1 = dir * l[0];
            let d2 = dir * l[1];
            let d3 = dir * l[2];
            joint_offsets.push([d1.x, d1.y, d1.z]);
            joint_offsets.push([d2.x, d2.y, d2.z]);
            fingertips.push([d3.x, d3.y, d3.z]);

            let base = (fi * 3) as u32;
            segments.push((p0, p1, base, r));
            segments.push((p1, p2, base + 1, r * 0.92));
            segments.push((p2, p3, base + 2, r * 0.85));
        }

        if side == Side::Left {
            let mirror = AffineTransform::from_parts(
                &Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0)),
                &Vector3::zeros(),
            );
            mesh = mesh.transformed_affine(&mirror);
            for s in &mut segments {
                s.0.x = -s.0.x;
                s.1.x = -s.1.x;
            }
            for o in &mut joint_offsets {
                o[0] = -o[0];
            }
            for t in &mut fingertips {
                t[0] = -t[0];
            }
        }

        // Palm group: palm-capsule vertices within the band of the inner
        // (−y) tangent plane. Selected after mirroring (y is unaffected) so
        // left and right groups use identical indices.
        let inner_y = -(PALM_RADIUS * girth) + PALM_FACE_BAND;
        let palm_group: Vec<usize> = (0..palm_count)
            .filter(|&i| mesh.vertices[i].y <= inner_y)
            .collect();
        mesh.groups.insert("palm".into(), palm_group);

        let mut skin = skin_to_segments(&mesh.vertices, &segments);
        quantize_mesh(&mut mesh);
        quantize_skin(&mut skin);
        for o in &mut joint_offsets {
            *o = [q32(o[0]), q32(o[1]), q32(o[2])];
        }
        for t in &mut fingertips {
            *t = [q32(t[0]), q32(t[1]), q32(t[2])];
        }

        HandModel {
            side,
            mesh,
            skin,
            joint_offsets,
            fingertips,
        }
    }

    pub fn palm_indices(&self) -> &[usize] {
        self.mesh.groups.get("palm").map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Rest positions of the 15 finger joints in the wrist frame.
    pub fn rest_joints(&self) -> Vec<Point3<f64>> {
        let mut out = Vec::with_capacity(HAND_JOINTS);
        for j in 0..HAND_JOINTS {
            let off = Vector3::new(
                self.joint_offsets[j][0],
                self.joint_offsets[j][1],
                self.joint_offsets[j][2],
            );
            let p = match hand_joint_parent(j) {
                None => Point3::from(off),
                Some(p) => out[p] + off,
            };
            out.push(p);
        }
        out
    }
}

/// Radii (meters, unit shape) of the capsule for each body bone, keyed by
/// the child joint.
fn body_bone_radius(child: usize) -> f64 {
    use super::tree::*;
    match child {
        1 => 0.100,
        2 => 0.105,
        3 => 0.110,
        NECK => 0.050,
        HEAD => 0.045,
        LEFT_COLLAR | RIGHT_COLLAR => 0.045,
        LEFT_SHOULDER | RIGHT_SHOULDER => 0.045,
        LEFT_ELBOW | RIGHT_ELBOW => 0.042,
        LEFT_WRIST | RIGHT_WRIST => 0.036,
        LEFT_HIP | RIGHT_HIP => 0.075,
        15 | 19 => 0.070,
        16 | 20 => 0.052,
        17 | 21 => 0.032,
        _ => 0.05,
    }
}

fn body_joint_sphere_radius(j: usize) -> f64 {
    use super::tree::*;
    match j {
        PELVIS => 0.100,
        1 => 0.105,
        2 | 3 => 0.110,
        NECK => 0.050,
        LEFT_COLLAR | RIGHT_COLLAR => 0.045,
        LEFT_SHOULDER | RIGHT_SHOULDER => 0.048,
        LEFT_ELBOW | RIGHT_ELBOW => 0.042,
        LEFT_WRIST | RIGHT_WRIST => 0.036,
        LEFT_HIP | RIGHT_HIP => 0.075,
        15 | 19 => 0.065,
        16 | 20 => 0.050,
        17 | 21 => 0.030,
        _ => 0.0, // head has a dedicated sphere
    }
}

/// Rest offsets (meters, unit shape) of the 22 body joints.
const BODY_OFFSETS: [[f64; 3]; BODY_JOINTS] = [
    [0.0, 0.0, 0.0],      // pelvis
    [0.0, 0.12, 0.0],     // spine1
    [0.0, 0.13, 0.0],     // spine2
    [0.0, 0.13, 0.0],     // spine3
    [0.0, 0.15, 0.0],     // neck
    [0.0, 0.10, 0.0],     // head
    [-0.03, 0.10, 0.0],   // left_collar (from spine3)
    [-0.12, 0.02, 0.0],   // left_shoulder
    [-0.23, 0.0, 0.0],    // left_elbow
    [-0.21, 0.0, 0.0],    // left_wrist
    [0.03, 0.10, 0.0],    // right_collar
    [0.12, 0.02, 0.0],    // right_shoulder
    [0.23, 0.0, 0.0],     // right_elbow
    [0.21, 0.0, 0.0],     // right_wrist
    [-0.09, -0.06, 0.0],  // left_hip
    [0.0, -0.42, 0.0],    // left_knee
    [0.0, -0.43, 0.0],    // left_ankle
    [0.0, -0.05, 0.12],   // left_foot
    [0.09, -0.06, 0.0],   // right_hip
    [0.0, -0.42, 0.0],    // right_knee
    [0.0, -0.43, 0.0],    // right_ankle
    [0.0, -0.05, 0.12],   // right_foot
];

const BODY_PARENTS: [i32; BODY_JOINTS] = [
    -1, 0, 1, 2, 3, 4, 3, 6, 7, 8, 3, 10, 11, 12, 0, 14, 15, 16, 0, 18, 19, 20,
];

/// The full articulated template: 52-joint tree, composite rest mesh with
/// skinning weights, and the two hand sub-models.
#[derive(Debug, Clone)]
pub struct BodyModel {
    pub shape: BodyShape,
    pub tree: KinematicTree,
    /// Composite rest mesh (body, then left hand, then right hand), with
    /// groups "palm_left", "palm_right", "hand_left", "hand_right".
    pub mesh: TriMesh,
    pub skin: Vec<SkinVertex>,
    pub left_hand: HandModel,
    pub right_hand: HandModel,
    /// Vertex offset of each hand inside the composite mesh.
    pub left_hand_offset: usize,
    pub right_hand_offset: usize,
}

impl BodyModel {
    pub fn build(shape: &BodyShape) -> Result<BodyModel, super::BodyError> {
        shape.validate()?;
        let tree = Self::build_tree(shape);
        let rest: Vec<Point3<f64>> = tree.rest_positions().iter().map(|v| Point3::from(*v)).collect();
        let girth = shape.0[0];

        let mut mesh = TriMesh::default();
        // Bone capsules.
        for c in 1..BODY_JOINTS {
            let p = tree.joints[c].parent.unwrap();
            mesh.append(&shapes::capsule(rest[p], rest[c], body_bone_radius(c) * girth, 18, 5));
        }
        // Joint spheres.
        for (j, pos) in rest.iter().enumerate().take(BODY_JOINTS) {
            let r = body_joint_sphere_radius(j) * girth;
            if r > 0.0 {
                mesh.append(
                    &shapes::icosphere(r, 1)
                        .transformed(&crate::geom::RigidTransform::from_translation(pos.coords)),
                );
            }
        }
        // Head.
        let head_scale = shape.0[0] * shape.0[2];
        let head_center = rest[HEAD] + Vector3::new(0.0, 0.045, 0.01) * head_scale;
        mesh.append(
            &shapes::icosphere(0.095 * head_scale, 2)
                .transformed(&crate::geom::RigidTransform::from_translation(head_center.coords)),
        );

        // Body skinning: bones plus a synthetic head segment.
        let mut segments: Vec<(Point3<f64>, Point3<f64>, u32, f64)> = Vec::new();
        for c in 1..BODY_JOINTS {
            let p = tree.joints[c].parent.unwrap();
            segments.push((rest[p], rest[c], p as u32, body_bone_radius(c) * girth));
        }
        segments.push((
            rest[HEAD],
            rest[HEAD] + Vector3::y() * (0.09 * head_scale),
            HEAD as u32,
            0.095 * head_scale,
        ));
        let mut skin = skin_to_segments(&mesh.vertices, &segments);

        // Hands, remapped into full-skeleton joint ids and renamed groups.
        let left_hand = HandModel::build(Side::Left, shape);
        let right_hand = HandModel::build(Side::Right, shape);
        let mut offsets = [0usize; 2];
        for hand in [&left_hand, &right_hand] {
            let side = hand.side;
            let wrist_pos = rest[side.wrist()];
            let mut hm = hand
                .mesh
                .transformed(&crate::geom::RigidTransform::from_translation(wrist_pos.coords));
            let palm = hm.groups.remove("palm").unwrap_or_default();
            hm.groups.insert(format!("palm_{}", side.label()), palm);
            hm.groups
                .insert(format!("hand_{}", side.label()), (0..hm.vertices.len()).collect());
            let off = mesh.append(&hm);
            match side {
                Side::Left => offsets[0] = off,
                Side::Right => offsets[1] = off,
            }
            let base = side.hand_base() as u32;
            let wrist = side.wrist() as u32;
            skin.extend(hand.skin.iter().map(|s| {
                let mut out = *s;
                for (slot, j) in out.joints.iter_mut().enumerate() {
                    if out.weights[slot] > 0.0 {
                        *j = if *j == HAND_WRIST_ID { wrist } else { base + *j };
                    }
                }
                out
            }));
        }

        quantize_mesh(&mut mesh);
        quantize_skin(&mut skin);
        mesh.validate().map_err(super::BodyError::Geometry)?;
        assert_eq!(mesh.vertices.len(), skin.len());

        Ok(BodyModel {
            shape: *shape,
            tree,
            mesh,
            skin,
            left_hand,
            right_hand,
            left_hand_offset: offsets[0],
            right_hand_offset: offsets[1],
        })
    }

    /// Kinematic tree alone (no mesh or skinning): cheap enough for
    /// per-sample use in data synthesis.
    pub fn build_tree(shape: &BodyShape) -> KinematicTree {
        let mut joints = Vec::with_capacity(TOTAL_JOINTS);
        for j in 0..BODY_JOINTS {
            let m = shape.joint_multiplier(j);
            joints.push(Joint {
                name: BODY_JOINT_NAMES[j].to_string(),
                parent: if BODY_PARENTS[j] < 0 { None } else { Some(BODY_PARENTS[j] as usize) },
                offset: [
                    q32(BODY_OFFSETS[j][0] * m),
                    q32(BODY_OFFSETS[j][1] * m),
                    q32(BODY_OFFSETS[j][2] * m),
                ],
            });
        }
        for side in [Side::Left, Side::Right] {
            let scale = shape.0[0] * shape.0[9];
            let base = side.hand_base();
            debug_assert_eq!(
                base,
                if side == Side::Left { LEFT_HAND_BASE } else { RIGHT_HAND_BASE }
            );
            for j in 0..HAND_JOINTS {
                let f = j / 3;
                let spec = FINGERS[f];
                let dir = Vector3::new(spec.dir[0], spec.dir[1], spec.dir[2]).normalize();
                let mut off = match j % 3 {
                    0 => Vector3::new(spec.mcp[0], spec.mcp[1], spec.mcp[2]) * scale,
                    1 => dir * (spec.lengths[0] * scale),
                    _ => dir * (spec.lengths[1] * scale),
                };
                if side == Side::Left {
                    off.x = -off.x;
                }
                joints.push(Joint {
                    name: hand_joint_name(side, j),
                    parent: Some(match hand_joint_parent(j) {
                        None => side.wrist(),
                        Some(p) => base + p,
                    }),
                    offset: [q32(off.x), q32(off.y), q32(off.z)],
                });
            }
        }
        KinematicTree { joints }
    }

    pub fn rest_positions(&self) -> Vec<Point3<f64>> {
        self.tree.rest_positions().iter().map(|v| Point3::from(*v)).collect()
    }

    /// Indices of the palm vertex group on the composite mesh, ascending.
    pub fn palm_vertices(&self, side: Side) -> Result<&[usize], super::BodyError> {
        self.mesh
            .group(&format!("palm_{}", side.label()))
            .map_err(super::BodyError::Geometry)
    }

    pub fn hand(&self, side: Side) -> &HandModel {
        match side {
            Side::Left => &self.left_hand,
            Side::Right => &self.right_hand,
        }
    }

    pub fn hand_vertex_offset(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left_hand_offset,
            Side::Right => self.right_hand_offset,
        }
    }
}
