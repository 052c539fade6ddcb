//! Checkpoint container: "GDFM" magic, u32 version, u64 JSON-header length,
//! JSON header (network dims/activations + arbitrary metadata + array
//! manifest), raw little-endian float payload, trailing CRC32 over all
//! preceding bytes.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::mlp::{Activation, Layer, Mlp};
use super::{AdamState, NeuralError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GDFM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayPayload {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl ArrayPayload {
    fn dtype(&self) -> &'static str {
        match self {
            ArrayPayload::F32(_) => "f32",
            ArrayPayload::F64(_) => "f64",
        }
    }

    fn len(&self) -> usize {
        match self {
            ArrayPayload::F32(v) => v.len(),
            ArrayPayload::F64(v) => v.len(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    dtype: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    metadata: Value,
    arrays: Vec<ArraySpec>,
}

/// Named float arrays plus free-form JSON metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: Value,
    arrays: BTreeMap<String, ArrayPayload>,
}

impl Checkpoint {
    pub fn new(metadata: Value) -> Checkpoint {
        Checkpoint {
            metadata,
            arrays: BTreeMap::new(),
        }
    }

    pub fn insert_f32(&mut self, name: &str, data: Vec<f32>) {
        self.arrays.insert(name.to_string(), ArrayPayload::F32(data));
    }

    pub fn insert_f64(&mut self, name: &str, data: Vec<f64>) {
        self.arrays.insert(name.to_string(), ArrayPayload::F64(data));
    }

    pub fn f32(&self, name: &str) -> Result<&[f32], NeuralError> {
        match self.arrays.get(name) {
            Some(ArrayPayload::F32(v)) => Ok(v),
            Some(_) => Err(NeuralError::CorruptCheckpoint(format!(
                "array `{name}` has dtype f64, expected f32"
            ))),
            None => Err(NeuralError::CorruptCheckpoint(format!("missing array `{name}`"))),
        }
    }

    pub fn f64(&self, name: &str) -> Result<&[f64], NeuralError> {
        match self.arrays.get(name) {
            Some(ArrayPayload::F64(v)) => Ok(v),
            Some(_) => Err(NeuralError::CorruptCheckpoint(format!(
                "array `{name}` has dtype f32, expected f64"
            ))),
            None => Err(NeuralError::CorruptCheckpoint(format!("missing array `{name}`"))),
        }
    }

    pub fn has_array(&self, name: &str) -> bool {
        self.arrays.contains_key(name)
    }

    /// Store a network under a name prefix: parameters as one f32 array,
    /// architecture in metadata["nets"][prefix].
    pub fn insert_mlp(&mut self, prefix: &str, net: &Mlp) {
        self.insert_f32(&format!("{prefix}.params"), net.params_flat());
        let nets = self
            .metadata
            .as_object_mut()
            .expect("checkpoint metadata must be a JSON object")
            .entry("nets")
            .or_insert_with(|| Value::Object(Default::default()));
        nets.as_object_mut().unwrap().insert(
            prefix.to_string(),
            serde_json::json!({
                "dims": net.dims(),
                "activations": net.activations(),
                "init_seed": net.init_seed,
            }),
        );
    }

    pub fn mlp(&self, prefix: &str) -> Result<Mlp, NeuralError> {
        let spec = self
            .metadata
            .get("nets")
            .and_then(|n| n.get(prefix))
            .ok_or_else(|| {
                NeuralError::CorruptCheckpoint(format!("missing net spec for `{prefix}`"))
            })?;
        let dims: Vec<usize> = serde_json::from_value(spec["dims"].clone())
            .map_err(|e| NeuralError::CorruptCheckpoint(format!("net `{prefix}` dims: {e}")))?;
        let acts: Vec<Activation> = serde_json::from_value(spec["activations"].clone())
            .map_err(|e| NeuralError::CorruptCheckpoint(format!("net `{prefix}` acts: {e}")))?;
        let init_seed = spec["init_seed"].as_u64().unwrap_or(0);
        let params = self.f32(&format!("{prefix}.params"))?;
        if dims.len() < 2 || acts.len() != dims.len() - 1 {
            return Err(NeuralError::CorruptCheckpoint(format!(
                "net `{prefix}` has inconsistent architecture"
            )));
        }
        let mut layers = Vec::with_capacity(acts.len());
        let mut off = 0usize;
        for (li, &act) in acts.iter().enumerate() {
            let (ni, no) = (dims[li], dims[li + 1]);
            let wlen = ni * no;
            if off + wlen + no > params.len() {
                return Err(NeuralError::CorruptCheckpoint(format!(
                    "net `{prefix}` parameter array too short"
                )));
            }
            layers.push(Layer {
                w: params[off..off + wlen].to_vec(),
                b: params[off + wlen..off + wlen + no].to_vec(),
                act,
                in_dim: ni,
                out_dim: no,
            });
            off += wlen + no;
        }
        if off != params.len() {
            return Err(NeuralError::CorruptCheckpoint(format!(
                "net `{prefix}` parameter array too long"
            )));
        }
        Ok(Mlp { layers, init_seed })
    }

    /// Store optimizer state under a prefix.
    pub fn insert_adam(&mut self, prefix: &str, st: &AdamState) {
        self.insert_f64(&format!("{prefix}.adam_m"), st.m.clone());
        self.insert_f64(&format!("{prefix}.adam_v"), st.v.clone());
        let opts = self
            .metadata
            .as_object_mut()
            .expect("checkpoint metadata must be a JSON object")
            .entry("optimizers")
            .or_insert_with(|| Value::Object(Default::default()));
        opts.as_object_mut().unwrap().insert(
            prefix.to_string(),
            serde_json::json!({
                "step": st.step, "lr": st.lr,
                "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps,
            }),
        );
    }

    pub fn adam(&self, prefix: &str) -> Result<AdamState, NeuralError> {
        let spec = self
            .metadata
            .get("optimizers")
            .and_then(|n| n.get(prefix))
            .ok_or_else(|| {
                NeuralError::CorruptCheckpoint(format!("missing optimizer spec for `{prefix}`"))
            })?;
        Ok(AdamState {
            m: self.f64(&format!("{prefix}.adam_m"))?.to_vec(),
            v: self.f64(&format!("{prefix}.adam_v"))?.to_vec(),
            step: spec["step"].as_u64().unwrap_or(0),
            lr: spec["lr"].as_f64().unwrap_or(0.0),
            beta1: spec["beta1"].as_f64().unwrap_or(0.9),
            beta2: spec["beta2"].as_f64().unwrap_or(0.999),
            eps: spec["eps"].as_f64().unwrap_or(1e-8),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            metadata: self.metadata.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, a)| ArraySpec {
                    name: name.clone(),
                    dtype: a.dtype().into(),
                    len: a.len(),
                })
                .collect(),
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        for a in self.arrays.values() {
            match a {
                ArrayPayload::F32(v) => {
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                ArrayPayload::F64(v) => {
                    for x in v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, NeuralError> {
        let corrupt = |msg: String| NeuralError::CorruptCheckpoint(msg);
        if bytes.len() < 20 {
            return Err(corrupt(format!("file too short: {} bytes", bytes.len())));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored_crc != computed {
            return Err(corrupt(format!(
                "CRC mismatch: stored {stored_crc:#010x}, computed {computed:#010x}"
            )));
        }
        if &body[0..4] != CHECKPOINT_MAGIC {
            return Err(corrupt(format!("bad magic {:02x?}", &body[0..4])));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!(
                "unsupported version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let hlen = u64::from_le_bytes(body[8..16].try_into().unwrap()) as usize;
        if 16 + hlen > body.len() {
            return Err(corrupt("truncated header".into()));
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[16..16 + hlen])
            .map_err(|e| corrupt(format!("header: {e}")))?;
        let mut pos = 16 + hlen;
        let mut arrays = BTreeMap::new();
        for spec in &header.arrays {
            let payload = match spec.dtype.as_str() {
                "f32" => {
                    let nbytes = spec.len * 4;
                    if pos + nbytes > body.len() {
                        return Err(corrupt(format!("array `{}` truncated", spec.name)));
                    }
                    let v = body[pos..pos + nbytes]
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    pos += nbytes;
                    ArrayPayload::F32(v)
                }
                "f64" => {
                    let nbytes = spec.len * 8;
                    if pos + nbytes > body.len() {
                        return Err(corrupt(format!("array `{}` truncated", spec.name)));
                    }
                    let v = body[pos..pos + nbytes]
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    pos += nbytes;
                    ArrayPayload::F64(v)
                }
                other => return Err(corrupt(format!("unknown dtype `{other}`"))),
            };
            arrays.insert(spec.name.clone(), payload);
        }
        if pos != body.len() {
            return Err(corrupt(format!("{} trailing bytes", body.len() - pos)));
        }
        Ok(Checkpoint {
            metadata: header.metadata,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, NeuralError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_checkpoint() -> (Checkpoint, Mlp) {
        let net = Mlp::new(
            &[5, 8, 3],
            &[Activation::Silu, Activation::Identity],
            42,
        )
        .unwrap();
        let mut cp = Checkpoint::new(serde_json::json!({
            "bps_seed": 17, "schedule": {"t": 1000}, "data_seed": 3,
        }));
        cp.insert_mlp("denoiser", &net);
        let mut adam = AdamState::new(net.param_count(), 5e-4);
        adam.m[3] = 0.125;
        adam.step = 77;
        cp.insert_adam("denoiser", &adam);
        (cp, net)
    }

    #[test]
    fn roundtrip_preserves_forward_outputs_bitwise() {
        let (cp, net) = sample_checkpoint();
        let bytes = cp.to_bytes();
        let loaded = Checkpoint::from_bytes(&bytes).unwrap();
        let net2 = loaded.mlp("denoiser").unwrap();
        let x = [0.1, -0.4, 2.0, 0.9, -1.7];
        let a = net.forward(&x).unwrap();
        let b = net2.forward(&x).unwrap();
        assert_eq!(a, b);
        assert_eq!(loaded.metadata["bps_seed"], 17);
        let adam = loaded.adam("denoiser").unwrap();
        assert_eq!(adam.step, 77);
        assert_eq!(adam.m[3], 0.125);
        assert_eq!(adam.lr, 5e-4);
        // Byte-stable re-serialization.
        assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn truncation_is_detected() {
        let (cp, _) = sample_checkpoint();
        let bytes = cp.to_bytes();
        for cut in [bytes.len() - 1, bytes.len() - 9, 10, 3] {
            assert!(
                matches!(
                    Checkpoint::from_bytes(&bytes[..cut]),
                    Err(NeuralError::CorruptCheckpoint(_))
                ),
                "cut at {cut} not detected"
            );
        }
    }

    #[test]
    fn bitflip_fails_crc() {
        let (cp, _) = sample_checkpoint();
        let mut bytes = cp.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("CRC"), "got: {err}");
    }

    #[test]
    fn version_mismatch_reports_versions() {
        let (cp, _) = sample_checkpoint();
        let mut bytes = cp.to_bytes();
        bytes[4] = 9;
        // Re-stamp the CRC so the version check itself is exercised.
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 9"), "got: {err}");
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.gdfm");
        let (cp, _) = sample_checkpoint();
        cp.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.to_bytes(), cp.to_bytes());
    }
}
