//! Template serialization: "GDTM" magic, u32 version, u64 JSON header
//! length, JSON header, then the raw little-endian arrays the header
//! manifests, in order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::pose::BodyShape;
use super::template::{BodyModel, HandModel, SkinVertex};
use super::tree::{Joint, KinematicTree, Side, HAND_JOINTS, TOTAL_JOINTS};
use super::BodyError;
use crate::geom::TriMesh;

pub const TEMPLATE_MAGIC: &[u8; 4] = b"GDTM";
pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    dtype: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointSpec {
    name: String,
    parent: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TemplateHeader {
    shape: [f64; 10],
    joints: Vec<JointSpec>,
    body_groups: BTreeMap<String, Vec<usize>>,
    left_groups: BTreeMap<String, Vec<usize>>,
    right_groups: BTreeMap<String, Vec<usize>>,
    left_hand_offset: usize,
    right_hand_offset: usize,
    arrays: Vec<ArraySpec>,
}

enum ArrayData {
    F32(Vec<f32>),
    U32(Vec<u32>),
}

impl ArrayData {
    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F32(_) => "f32",
            ArrayData::U32(_) => "u32",
        }
    }

    fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::U32(v) => v.len(),
        }
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        match self {
            ArrayData::F32(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            ArrayData::U32(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

fn mesh_arrays(prefix: &str, mesh: &TriMesh, skin: &[SkinVertex]) -> Vec<(String, ArrayData)> {
    let mut verts = Vec::with_capacity(mesh.vertices.len() * 3);
    for v in &mesh.vertices {
        verts.extend_from_slice(&[v.x as f32, v.y as f32, v.z as f32]);
    }
    let mut faces = Vec::with_capacity(mesh.faces.len() * 3);
    for f in &mesh.faces {
        faces.extend_from_slice(&[f[0] as u32, f[1] as u32, f[2] as u32]);
    }
    let mut sj = Vec::with_capacity(skin.len() * 4);
    let mut sw = Vec::with_capacity(skin.len() * 4);
    for s in skin {
        sj.extend_from_slice(&s.joints);
        for w in s.weights {
            sw.push(w as f32);
        }
    }
    vec![
        (format!("{prefix}_vertices"), ArrayData::F32(verts)),
        (format!("{prefix}_faces"), ArrayData::U32(faces)),
        (format!("{prefix}_skin_joints"), ArrayData::U32(sj)),
        (format!("{prefix}_skin_weights"), ArrayData::F32(sw)),
    ]
}

/// Serialize a body model to GDTM bytes.
pub fn template_to_bytes(model: &BodyModel) -> Vec<u8> {
    let mut arrays: Vec<(String, ArrayData)> = Vec::new();

    let mut offsets = Vec::with_capacity(TOTAL_JOINTS * 3);
    for j in &model.tree.joints {
        offsets.extend_from_slice(&[j.offset[0] as f32, j.offset[1] as f32, j.offset[2] as f32]);
    }
    arrays.push(("tree_offsets".into(), ArrayData::F32(offsets)));
    arrays.extend(mesh_arrays("body", &model.mesh, &model.skin));
    for hand in [&model.left_hand, &model.right_hand] {
        let p = hand.side.label();
        arrays.extend(mesh_arrays(p, &hand.mesh, &hand.skin));
        let mut jo = Vec::with_capacity(HAND_JOINTS * 3);
        for o in &hand.joint_offsets {
            jo.extend_from_slice(&[o[0] as f32, o[1] as f32, o[2] as f32]);
        }
        arrays.push((format!("{p}_joint_offsets"), ArrayData::F32(jo)));
        let mut tips = Vec::with_capacity(15);
        for t in &hand.fingertips {
            tips.extend_from_slice(&[t[0] as f32, t[1] as f32, t[2] as f32]);
        }
        arrays.push((format!("{p}_fingertips"), ArrayData::F32(tips)));
    }

    let header = TemplateHeader {
        shape: model.shape.0,
        joints: model
            .tree
            .joints
            .iter()
            .map(|j| JointSpec {
                name: j.name.clone(),
                parent: j.parent.map(|p| p as i64).unwrap_or(-1),
            })
            .collect(),
        body_groups: model.mesh.groups.clone(),
        left_groups: model.left_hand.mesh.groups.clone(),
        right_groups: model.right_hand.mesh.groups.clone(),
        left_hand_offset: model.left_hand_offset,
        right_hand_offset: model.right_hand_offset,
        arrays: arrays
            .iter()
            .map(|(name, data)| ArraySpec {
                name: name.clone(),
                dtype: data.dtype().into(),
                len: data.len(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::new();
    out.extend_from_slice(TEMPLATE_MAGIC);
    out.extend_from_slice(&TEMPLATE_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    for (_, data) in &arrays {
        data.write_to(&mut out).expect("vec write");
    }
    out
}

pub fn save_template(path: &Path, model: &BodyModel) -> Result<(), BodyError> {
    std::fs::write(path, template_to_bytes(model))?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BodyError> {
        if self.pos + n > self.buf.len() {
            return Err(BodyError::CorruptTemplate(format!(
                "truncated: need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

fn read_arrays(
    cur: &mut Cursor,
    specs: &[ArraySpec],
) -> Result<BTreeMap<String, ArrayData>, BodyError> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let data = match spec.dtype.as_str() {
            "f32" => {
                let raw = cur.take(spec.len * 4)?;
                ArrayData::F32(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            }
            "u32" => {
                let raw = cur.take(spec.len * 4)?;
                ArrayData::U32(
                    raw.chunks_exact(4)
                        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            }
            other => {
                return Err(BodyError::CorruptTemplate(format!(
                    "unknown dtype `{other}` for array `{}`",
                    spec.name
                )))
            }
        };
        out.insert(spec.name.clone(), data);
    }
    Ok(out)
}

fn take_f32(map: &mut BTreeMap<String, ArrayData>, name: &str) -> Result<Vec<f32>, BodyError> {
    match map.remove(name) {
        Some(ArrayData::F32(v)) => Ok(v),
        Some(_) => Err(BodyError::CorruptTemplate(format!("array `{name}` has wrong dtype"))),
        None => Err(BodyError::CorruptTemplate(format!("missing array `{name}`"))),
    }
}

fn take_u32(map: &mut BTreeMap<String, ArrayData>, name: &str) -> Result<Vec<u32>, BodyError> {
    match map.remove(name) {
        Some(ArrayData::U32(v)) => Ok(v),
        Some(_) => Err(BodyError::CorruptTemplate(format!("array `{name}` has wrong dtype"))),
        None => Err(BodyError::CorruptTemplate(format!("missing array `{name}`"))),
    }
}

fn mesh_from_arrays(
    map: &mut BTreeMap<String, ArrayData>,
    prefix: &str,
    groups: BTreeMap<String, Vec<usize>>,
) -> Result<(TriMesh, Vec<SkinVertex>), BodyError> {
    let verts = take_f32(map, &format!("{prefix}_vertices"))?;
    let faces = take_u32(map, &format!("{prefix}_faces"))?;
    let sj = take_u32(map, &format!("{prefix}_skin_joints"))?;
    let sw = take_f32(map, &format!("{prefix}_skin_weights"))?;
    if verts.len() % 3 != 0 || faces.len() % 3 != 0 || sj.len() != sw.len() || sj.len() % 4 != 0 {
        return Err(BodyError::CorruptTemplate(format!("bad array shapes for `{prefix}`")));
    }
    let n = verts.len() / 3;
    if sj.len() / 4 != n {
        return Err(BodyError::CorruptTemplate(format!(
            "skin count mismatch for `{prefix}`: {} vs {n}",
            sj.len() / 4
        )));
    }
    let mut mesh = TriMesh::new(
        verts
            .chunks_exact(3)
            .map(|c| Point3::new(c[0] as f64, c[1] as f64, c[2] as f64))
            .collect(),
        faces
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect(),
    );
    mesh.groups = groups;
    mesh.validate().map_err(|e| BodyError::CorruptTemplate(e.to_string()))?;
    let skin = sj
        .chunks_exact(4)
        .zip(sw.chunks_exact(4))
        .map(|(j, w)| SkinVertex {
            joints: [j[0], j[1], j[2], j[3]],
            weights: [w[0] as f64, w[1] as f64, w[2] as f64, w[3] as f64],
        })
        .collect();
    Ok((mesh, skin))
}

/// Deserialize a body model from GDTM bytes.
pub fn template_from_bytes(bytes: &[u8]) -> Result<BodyModel, BodyError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != TEMPLATE_MAGIC {
        return Err(BodyError::CorruptTemplate(format!("bad magic {magic:02x?}")));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != TEMPLATE_VERSION {
        return Err(BodyError::CorruptTemplate(format!(
            "unsupported version {version}, expected {TEMPLATE_VERSION}"
        )));
    }
    let hlen = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let header: TemplateHeader = serde_json::from_slice(cur.take(hlen)?)
        .map_err(|e| BodyError::CorruptTemplate(format!("header: {e}")))?;
    if header.joints.len() != TOTAL_JOINTS {
        return Err(BodyError::CorruptTemplate(format!(
            "expected {TOTAL_JOINTS} joints, found {}",
            header.joints.len()
        )));
    }
    let mut arrays = read_arrays(&mut cur, &header.arrays)?;
    if cur.pos != bytes.len() {
        return Err(BodyError::CorruptTemplate(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }

    let offsets = take_f32(&mut arrays, "tree_offsets")?;
    if offsets.len() != TOTAL_JOINTS * 3 {
        return Err(BodyError::CorruptTemplate("tree_offsets has wrong length".into()));
    }
    let joints = header
        .joints
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let parent = if spec.parent < 0 {
                None
            } else {
                Some(spec.parent as usize)
            };
            Joint {
                name: spec.name.clone(),
                parent,
                offset: [
                    offsets[i * 3] as f64,
                    offsets[i * 3 + 1] as f64,
                    offsets[i * 3 + 2] as f64,
                ],
            }
        })
        .collect();
    let tree = KinematicTree { joints };

    let (mesh, skin) = mesh_from_arrays(&mut arrays, "body", header.body_groups)?;
    let mut hands = Vec::new();
    for (side, groups) in [
        (Side::Left, header.left_groups),
        (Side::Right, header.right_groups),
    ] {
        let p = side.label();
        let (hmesh, hskin) = mesh_from_arrays(&mut arrays, p, groups)?;
        let jo = take_f32(&mut arrays, &format!("{p}_joint_offsets"))?;
        let tips = take_f32(&mut arrays, &format!("{p}_fingertips"))?;
        if jo.len() != HAND_JOINTS * 3 || tips.len() != 15 {
            return Err(BodyError::CorruptTemplate(format!("bad hand arrays for `{p}`")));
        }
        hands.push(HandModel {
            side,
            mesh: hmesh,
            skin: hskin,
            joint_offsets: jo
                .chunks_exact(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect(),
            fingertips: tips
                .chunks_exact(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect(),
        });
    }
    let right_hand = hands.pop().unwrap();
    let left_hand = hands.pop().unwrap();

    Ok(BodyModel {
        shape: BodyShape(header.shape),
        tree,
        mesh,
        skin,
        left_hand,
        right_hand,
        left_hand_offset: header.left_hand_offset,
        right_hand_offset: header.right_hand_offset,
    })
}

pub fn load_template(path: &Path) -> Result<BodyModel, BodyError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    template_from_bytes(&bytes)
}
