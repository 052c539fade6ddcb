//! Pose denoiser: conditioning vector, sinusoidal time features,
//! per-coordinate corpus standardization, the training objective, and
//! ancestral sampling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::{NoiseSchedule, DEFAULT_STEPS};
use super::DiffusionError;
use crate::body::{PoseVector, Side, POSE_DIM};
use crate::geom::Rotation6D;
use crate::neural::{parallel_accumulate, Activation, AdamState, Checkpoint, Mlp, NeuralError};
use crate::rng::{derive_indexed_seed, derive_seed};

pub const CONDITION_DIM: usize = 5;
pub const TIME_EMBED_DIM: usize = 64;
pub const DENOISER_HIDDEN: usize = 512;
/// Retries after the first failed reverse chain before giving up.
pub const MAX_SAMPLE_RETRIES: usize = 3;
/// Checkpoint `kind` tag for pose-denoiser files.
pub const POSE_CKPT_KIND: &str = "pose-denoiser";

/// Where the object sits (pelvis-origin frame, meters) and which hand is
/// asked to do the grasping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub t_obj: [f64; 3],
    pub side: Side,
}

impl Condition {
    pub fn flatten(&self) -> [f64; CONDITION_DIM] {
        let (l, r) = match self.side {
            Side::Left => (1.0, 0.0),
            Side::Right => (0.0, 1.0),
        };
        [self.t_obj[0], self.t_obj[1], self.t_obj[2], l, r]
    }
}

/// Sinusoidal step features: interleaved (sin, cos) pairs over a geometric
/// frequency ladder from 1 down to 1e-4.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    assert!(dim >= 2 && dim % 2 == 0, "embedding dim must be even");
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for i in 0..half {
        let exponent = i as f64 / (half as f64 - 1.0);
        let freq = (10_000f64).powf(-exponent);
        let arg = t as f64 * freq;
        out.push(arg.sin());
        out.push(arg.cos());
    }
    out
}

/// Per-coordinate affine map fitted on a corpus so the denoiser sees
/// roughly unit-scale targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub const MIN_STD: f64 = 1e-6;

    pub fn identity(dim: usize) -> Standardization {
        Standardization {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(corpus: &[Vec<f64>]) -> Result<Standardization, DiffusionError> {
        let Some(first) = corpus.first() else {
            return Err(DiffusionError::EmptyCorpus);
        };
        let dim = first.len();
        let n = corpus.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in corpus {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for x in corpus {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .iter()
            .map(|s| (s / n).sqrt().max(Self::MIN_STD))
            .collect();
        Ok(Standardization { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

struct NoisedItem {
    input: Vec<f64>,
    eps: Vec<f64>,
}

/// Draws (t, ε) for batch item `i` from a per-item derived stream, forms
/// x_t from the standardized pose, and assembles the network input
/// [x_t, condition, time features].
fn noised_item(
    schedule: &NoiseSchedule,
    stdz: &Standardization,
    x0_raw: &[f64],
    cond: &Condition,
    seed: u64,
    i: usize,
) -> NoisedItem {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed_seed(seed, "noise-item", i as u64));
    let t = 1 + (rng.next_u64() % schedule.steps as u64) as usize;
    let x0 = stdz.apply(x0_raw);
    let eps: Vec<f64> = (0..x0.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let x_t = schedule
        .q_sample(&x0, t, &eps)
        .expect("t drawn within range");
    let mut input = Vec::with_capacity(x_t.len() + CONDITION_DIM + TIME_EMBED_DIM);
    input.extend_from_slice(&x_t);
    input.extend_from_slice(&cond.flatten());
    input.extend_from_slice(&time_embedding(t, TIME_EMBED_DIM));
    NoisedItem { input, eps }
}

/// Mean squared ε-prediction error over a batch, with the prediction
/// supplied by an arbitrary function so oracles can stand in for the net.
#[cfg(test)]
fn batch_loss_generic<P>(
    schedule: &NoiseSchedule,
    stdz: &Standardization,
    batch: &[(Vec<f64>, Condition)],
    seed: u64,
    predict: P,
) -> f64
where
    P: Fn(&NoisedItem) -> Vec<f64> + Sync,
{
    let dim = stdz.dim();
    let acc = parallel_accumulate(batch.len(), 0, |i, acc| {
        let (x0, cond) = &batch[i];
        let item = noised_item(schedule, stdz, x0, cond, seed, i);
        let pred = predict(&item);
        for (p, e) in pred.iter().zip(&item.eps) {
            let r = p - e;
            acc.loss += r * r;
        }
    });
    acc.loss / (batch.len() as f64 * dim as f64)
}

/// One optimizer step of the ε-prediction objective. Returns the batch
/// loss (mean squared error per coordinate). Deterministic for a given
/// (parameters, batch, seed) regardless of thread count.
pub fn train_step(
    net: &mut Mlp,
    schedule: &NoiseSchedule,
    stdz: &Standardization,
    batch: &[(Vec<f64>, Condition)],
    opt: &mut AdamState,
    seed: u64,
) -> Result<f64, DiffusionError> {
    if batch.is_empty() {
        return Err(DiffusionError::EmptyCorpus);
    }
    let dim = stdz.dim();
    let scale = 1.0 / (batch.len() as f64 * dim as f64);
    let net_ref: &Mlp = net;
    let acc = parallel_accumulate(batch.len(), net_ref.param_count(), |i, acc| {
        let (x0, cond) = &batch[i];
        let item = noised_item(schedule, stdz, x0, cond, seed, i);
        let (pred, cache) = net_ref
            .forward_cached(&item.input)
            .expect("input assembled to net dims");
        let mut upstream = vec![0.0; pred.len()];
        for ((u, p), e) in upstream.iter_mut().zip(&pred).zip(&item.eps) {
            let r = p - e;
            acc.loss += r * r * scale;
            *u = 2.0 * r * scale;
        }
        net_ref
            .backward(&cache, &upstream, &mut acc.grad)
            .expect("gradient buffer sized to param_count");
    });
    if !acc.loss.is_finite() {
        return Err(DiffusionError::NonFiniteLoss {
            step: opt.step,
            loss: acc.loss,
        });
    }
    let mut params = net.params_flat();
    opt.step(&mut params, &acc.grad)?;
    net.set_params_flat(&params)
        .expect("parameter vector length unchanged");
    Ok(acc.loss)
}

/// Runs the full reverse chain in standardized space. `predict` maps
/// (x_t, t) to ε̂; the chain starts from x_T ~ N(0,I) drawn from `seed`.
fn reverse_chain<P>(schedule: &NoiseSchedule, dim: usize, seed: u64, predict: P) -> Vec<f64>
where
    P: Fn(&[f64], usize) -> Vec<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    for t in (1..=schedule.steps).rev() {
        let eps_hat = predict(&x, t);
        let mut mean = schedule.reverse_mean(&x, t, &eps_hat);
        if t > 1 {
            let sigma = schedule.posterior_variance(t).sqrt();
            for m in &mut mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                *m += sigma * z;
            }
        }
        x = mean;
    }
    x
}

/// Denoiser bundle: network, schedule, and the corpus standardization it
/// was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseDiffusion {
    pub net: Mlp,
    pub schedule: NoiseSchedule,
    pub standardization: Standardization,
}

impl PoseDiffusion {
    pub fn input_dim() -> usize {
        POSE_DIM + CONDITION_DIM + TIME_EMBED_DIM
    }

    /// Freshly initialized denoiser with the standard architecture.
    pub fn new(init_seed: u64, standardization: Standardization) -> PoseDiffusion {
        assert_eq!(standardization.dim(), POSE_DIM);
        let net = Mlp::new(
            &[
                Self::input_dim(),
                DENOISER_HIDDEN,
                DENOISER_HIDDEN,
                DENOISER_HIDDEN,
                POSE_DIM,
            ],
            &[
                Activation::Silu,
                Activation::Silu,
                Activation::Silu,
                Activation::Identity,
            ],
            init_seed,
        )
        .expect("fixed architecture is valid");
        PoseDiffusion {
            net,
            schedule: NoiseSchedule::cosine(DEFAULT_STEPS),
            standardization,
        }
    }

    pub fn train_step(
        &mut self,
        batch: &[(Vec<f64>, Condition)],
        opt: &mut AdamState,
        seed: u64,
    ) -> Result<f64, DiffusionError> {
        train_step(
            &mut self.net,
            &self.schedule,
            &self.standardization,
            batch,
            opt,
            seed,
        )
    }

    /// Ancestral sampling. Runs the reverse chain, de-standardizes, and
    /// orthonormalizes every 6-d rotation block. A chain whose output
    /// contains a block that cannot be orthonormalized (or any non-finite
    /// coordinate) is re-drawn from a freshly derived seed, up to
    /// `MAX_SAMPLE_RETRIES` retries.
    pub fn sample(&self, cond: &Condition, seed: u64) -> Result<PoseVector, DiffusionError> {
        let cond_flat = cond.flatten();
        let predict = |x: &[f64], t: usize| -> Vec<f64> {
            let mut input = Vec::with_capacity(Self::input_dim());
            input.extend_from_slice(x);
            input.extend_from_slice(&cond_flat);
            input.extend_from_slice(&time_embedding(t, TIME_EMBED_DIM));
            self.net.forward(&input).expect("input matches net dims")
        };
        let mut last_err = DiffusionError::DegenerateSample {
            attempts: MAX_SAMPLE_RETRIES + 1,
        };
        for attempt in 0..=MAX_SAMPLE_RETRIES {
            let chain_seed = derive_indexed_seed(seed, "reverse-chain", attempt as u64);
            let x0 = reverse_chain(&self.schedule, POSE_DIM, chain_seed, &predict);
            let raw = self.standardization.invert(&x0);
            match orthonormalize_blocks(&raw) {
                Ok(pose) => return Ok(pose),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    /// Serializes network, schedule parameters, and standardization.
    /// `extra` entries are merged into the checkpoint metadata object.
    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let mut meta = serde_json::json!({
            "kind": POSE_CKPT_KIND,
            "schedule": {"steps": self.schedule.steps, "family": "cosine"},
        });
        if let Some(obj) = extra.as_object() {
            for (k, v) in obj {
                meta[k] = v.clone();
            }
        }
        let mut cp = Checkpoint::new(meta);
        cp.insert_mlp("denoiser", &self.net);
        cp.insert_f64("x0_mean", self.standardization.mean.clone());
        cp.insert_f64("x0_std", self.standardization.std.clone());
        cp
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<PoseDiffusion, DiffusionError> {
        let kind = cp.metadata["kind"].as_str().unwrap_or("");
        if kind != POSE_CKPT_KIND {
            return Err(DiffusionError::Neural(NeuralError::CorruptCheckpoint(
                format!("checkpoint kind `{kind}`, expected `{POSE_CKPT_KIND}`"),
            )));
        }
        let steps = cp.metadata["schedule"]["steps"]
            .as_u64()
            .ok_or_else(|| {
                DiffusionError::Neural(NeuralError::CorruptCheckpoint(
                    "missing schedule.steps".into(),
                ))
            })? as usize;
        let net = cp.mlp("denoiser")?;
        if net.in_dim() != Self::input_dim() || net.out_dim() != POSE_DIM {
            return Err(DiffusionError::DimMismatch {
                what: "denoiser architecture",
                want: Self::input_dim(),
                got: net.in_dim(),
            });
        }
        let standardization = Standardization {
            mean: cp.f64("x0_mean")?.to_vec(),
            std: cp.f64("x0_std")?.to_vec(),
        };
        if standardization.dim() != POSE_DIM || standardization.std.len() != POSE_DIM {
            return Err(DiffusionError::DimMismatch {
                what: "standardization vectors",
                want: POSE_DIM,
                got: standardization.dim(),
            });
        }
        Ok(PoseDiffusion {
            net,
            schedule: NoiseSchedule::cosine(steps),
            standardization,
        })
    }
}

/// Validates finiteness and replaces each 6-d block with its orthonormalized
/// (Gram–Schmidt) form.
fn orthonormalize_blocks(raw: &[f64]) -> Result<PoseVector, DiffusionError> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(DiffusionError::DegenerateSample { attempts: 1 });
    }
    let mut out = vec![0.0; POSE_DIM];
    for j in 0..POSE_DIM / 6 {
        let r = Rotation6D::from_slice(&raw[j * 6..j * 6 + 6]);
        let m = r
            .to_matrix()
            .map_err(|_| DiffusionError::DegenerateSample { attempts: 1 })?;
        let ortho = Rotation6D::from_matrix(&m);
        out[j * 6..j * 6 + 6].copy_from_slice(&ortho.to_array());
    }
    Ok(PoseVector(out))
}

/// Seed for the per-scene sampling stream used by generation and eval.
pub fn scene_seed(master: u64, scene_index: u64) -> u64 {
    derive_indexed_seed(derive_seed(master, "scene"), "sample", scene_index)
}
