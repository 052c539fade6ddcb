use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::body::{BodyShape, Side};
use crate::geom::BpsBasis;
use crate::rng::derive_indexed_seed;

use super::closure::{gen_closure_grasp, ClosureGrasp};
use super::objects::{procedural_object, ObjectKind, OBJECT_KINDS};
use super::reach::gen_reach_pose_with;
use super::SynthError;
use crate::geom::TriMesh;

/// Corpus filter threshold: keep samples with **more than** this many
/// contacting vertices.
pub const MIN_CONTACTS_DEFAULT: usize = 40;

/// Anything carrying a contact count can go through [`filter_corpus`].
pub trait ContactCount {
    fn contact_count(&self) -> usize;
}

/// Keep samples whose contact count strictly exceeds `min_contacts`,
/// preserving order.
pub fn filter_corpus<T: ContactCount>(samples: Vec<T>, min_contacts: usize) -> Vec<T> {
    samples
        .into_iter()
        .filter(|s| s.contact_count() > min_contacts)
        .collect()
}

/// One body-pose training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub pose132: Vec<f64>,
    pub t_b: [f64; 3],
    pub t_obj: [f64; 3],
    pub side: Side,
    pub contacts: usize,
    pub seed: u64,
}

/// One hand-grasp training sample: the object's basis-point encoding and
/// the 99-d grasp parameters, both in the object frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub bps512: Vec<f64>,
    pub grasp99: Vec<f64>,
    pub contacts: usize,
    pub seed: u64,
}

impl ContactCount for PoseRecord {
    fn contact_count(&self) -> usize {
        self.contacts
    }
}

impl ContactCount for GraspRecord {
    fn contact_count(&self) -> usize {
        self.contacts
    }
}

/// Write records as line-delimited JSON. Serialization is deterministic,
/// so (records) → bytes is a pure function.
pub fn write_ldjson<T: Serialize>(path: &Path, records: &[T]) -> Result<(), SynthError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a line-delimited JSON corpus written by [`write_ldjson`].
pub fn read_ldjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, SynthError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Configuration for pose-corpus synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseCorpusConfig {
    pub samples: usize,
    pub seed: u64,
    pub shape: BodyShape,
    /// Diversity jitter amplitude, degrees.
    pub jitter_deg: f64,
}

impl Default for PoseCorpusConfig {
    fn default() -> Self {
        Self {
            samples: 1024,
            seed: 0,
            shape: BodyShape::neutral(),
            jitter_deg: 5.0,
        }
    }
}

/// Configuration for grasp-corpus synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraspCorpusConfig {
    pub samples: usize,
    pub seed: u64,
    /// Seed of the fixed basis-point set used for object encodings.
    pub bps_seed: u64,
}

impl Default for GraspCorpusConfig {
    fn default() -> Self {
        Self { samples: 1024, seed: 0, bps_seed: 91 }
    }
}

/// Per-record object size range (bounding radius, meters). Kept well inside
/// the graspable limits so closures land in the filterable regime.
const OBJECT_RADIUS_RANGE: (f64, f64) = (0.02, 0.06);

fn object_for(i: usize, rng: &mut ChaCha8Rng) -> (ObjectKind, f64) {
    let kind = OBJECT_KINDS[i % OBJECT_KINDS.len()];
    let radius = rng.gen_range(OBJECT_RADIUS_RANGE.0..OBJECT_RADIUS_RANGE.1);
    (kind, radius)
}

fn side_for(i: usize) -> Side {
    if i % 2 == 0 {
        Side::Right
    } else {
        Side::Left
    }
}

/// Reaching targets are drawn from this sub-box of the workspace, biased
/// toward the reachable shell in front of the torso.
const TARGET_BOX: [(f64, f64); 3] = [(-0.55, 0.55), (-0.25, 0.75), (0.02, 0.65)];
const TARGET_DRAWS: usize = 24;

/// Closure attempts per record: approach directions are tried until one
/// clears the corpus contact filter; the densest grasp wins otherwise.
const GRASP_ATTEMPTS: u64 = 8;

fn densest_grasp(
    object: &TriMesh,
    side: Side,
    record_seed: u64,
) -> Result<ClosureGrasp, SynthError> {
    let mut best: Option<ClosureGrasp> = None;
    for a in 0..GRASP_ATTEMPTS {
        let s = derive_indexed_seed(record_seed, "grasp-attempt", a);
        let g = gen_closure_grasp(object, side, s)?;
        let dense = g.contacts > MIN_CONTACTS_DEFAULT;
        if best.as_ref().is_none_or(|b| g.contacts > b.contacts) {
            best = Some(g);
        }
        if dense {
            break;
        }
    }
    Ok(best.expect("GRASP_ATTEMPTS > 0"))
}

fn pose_sample(i: usize, cfg: &PoseCorpusConfig) -> Result<PoseRecord, SynthError> {
    let seed = derive_indexed_seed(cfg.seed, "pose-sample", i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = side_for(i);
    let (kind, radius) = object_for(i, &mut rng);

    // Draw targets until one is reachable; fall back to the last (clamped).
    let mut reach = None;
    for _ in 0..TARGET_DRAWS {
        let t = Point3::new(
            rng.gen_range(TARGET_BOX[0].0..TARGET_BOX[0].1),
            rng.gen_range(TARGET_BOX[1].0..TARGET_BOX[1].1),
            rng.gen_range(TARGET_BOX[2].0..TARGET_BOX[2].1),
        );
        let rp = gen_reach_pose_with(&t, side, &cfg.shape, seed, cfg.jitter_deg)?;
        let ok = rp.reachable;
        reach = Some(rp);
        if ok {
            break;
        }
    }
    let reach = reach.expect("TARGET_DRAWS > 0");

    // Contacts come from the grasp paired with this scene's object.
    let object = procedural_object(kind, radius);
    let grasp = densest_grasp(&object, side, seed)?;

    Ok(PoseRecord {
        pose132: reach.pose.0.clone(),
        t_b: [0.0; 3],
        t_obj: [reach.target.x, reach.target.y, reach.target.z],
        side,
        contacts: grasp.contacts,
        seed,
    })
}

/// Synthesize a reaching-pose corpus. Deterministic in `cfg` and
/// independent of thread count (records are indexed, not racing).
pub fn synth_pose_corpus(cfg: &PoseCorpusConfig) -> Result<Vec<PoseRecord>, SynthError> {
    (0..cfg.samples)
        .into_par_iter()
        .map(|i| pose_sample(i, cfg))
        .collect()
}

fn grasp_sample(i: usize, cfg: &GraspCorpusConfig, basis: &BpsBasis) -> Result<GraspRecord, SynthError> {
    let seed = derive_indexed_seed(cfg.seed, "grasp-sample", i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = side_for(i);
    let (kind, radius) = object_for(i, &mut rng);
    let object = procedural_object(kind, radius);
    let grasp = densest_grasp(&object, side, seed)?;
    Ok(GraspRecord {
        bps512: basis.encode_mesh(&object),
        grasp99: grasp.params.to_vec99(),
        contacts: grasp.contacts,
        seed,
    })
}

/// Synthesize a hand-grasp corpus with object encodings against the basis
/// drawn from `cfg.bps_seed`.
pub fn synth_grasp_corpus(cfg: &GraspCorpusConfig) -> Result<Vec<GraspRecord>, SynthError> {
    let basis = BpsBasis::standard(cfg.bps_seed);
    (0..cfg.samples)
        .into_par_iter()
        .map(|i| grasp_sample(i, cfg, &basis))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::PoseVector;

    #[derive(Debug, PartialEq)]
    struct S(usize);
    impl ContactCount for S {
        fn contact_count(&self) -> usize {
            self.0
        }
    }

    #[test]
    fn filter_is_strictly_greater_and_order_preserving() {
        let kept = filter_corpus(vec![S(0), S(40), S(41)], 40);
        assert_eq!(kept, vec![S(41)]);
        assert_eq!(filter_corpus(Vec::<S>::new(), 40), vec![]);
        // Threshold 0 still drops zero-contact samples.
        let kept = filter_corpus(vec![S(0), S(1), S(0), S(2)], 0);
        assert_eq!(kept, vec![S(1), S(2)]);
    }

    #[test]
    fn ldjson_roundtrips_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PoseCorpusConfig { samples: 6, seed: 5, ..Default::default() };
        let a = synth_pose_corpus(&cfg).unwrap();
        let b = synth_pose_corpus(&cfg).unwrap();
        assert_eq!(a, b, "generation must be deterministic");

        let pa = dir.path().join("a.ldjson");
        let pb = dir.path().join("b.ldjson");
        write_ldjson(&pa, &a).unwrap();
        write_ldjson(&pb, &b).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

        let back: Vec<PoseRecord> = read_ldjson(&pa).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn pose_corpus_records_are_well_formed() {
        let cfg = PoseCorpusConfig { samples: 8, seed: 21, ..Default::default() };
        let recs = synth_pose_corpus(&cfg).unwrap();
        assert_eq!(recs.len(), 8);
        let mut reachable_hits = 0;
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.t_b, [0.0; 3]);
            assert_eq!(r.side, side_for(i));
            let pose = PoseVector::from_vec(r.pose132.clone()).unwrap();
            assert!(pose.is_valid());
            // t_obj lies in the sampling box.
            for (axis, (lo, hi)) in TARGET_BOX.iter().enumerate() {
                assert!(r.t_obj[axis] >= *lo && r.t_obj[axis] <= *hi);
            }
            if r.contacts > MIN_CONTACTS_DEFAULT {
                reachable_hits += 1;
            }
        }
        // The closure oracle on 2–6 cm objects produces mostly dense grasps;
        // the filter must keep a usable fraction.
        assert!(reachable_hits >= 4, "only {reachable_hits}/8 dense grasps");
    }

    #[test]
    fn grasp_corpus_records_are_well_formed() {
        let cfg = GraspCorpusConfig { samples: 6, seed: 9, bps_seed: 91 };
        let recs = synth_grasp_corpus(&cfg).unwrap();
        assert_eq!(recs.len(), 6);
        for r in &recs {
            assert_eq!(r.bps512.len(), crate::geom::BPS_POINTS);
            assert_eq!(r.grasp99.len(), crate::body::GRASP_DIM);
            assert!(r.bps512.iter().all(|d| d.is_finite() && *d >= 0.0));
        }
        // Same config reproduces bitwise.
        let again = synth_grasp_corpus(&cfg).unwrap();
        assert_eq!(recs, again);
    }
}
