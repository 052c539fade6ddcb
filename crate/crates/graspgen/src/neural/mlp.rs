use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Silu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: out×in row-major weights, bias, activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Vec<f32>,
    pub b: Vec<f32>,
    pub act: Activation,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Feed-forward network. Parameters are stored in 32-bit floats; all math
/// and gradient accumulation run in 64-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub init_seed: u64,
}

/// Intermediate state captured by `forward_cached` for the backward pass:
/// layer inputs and pre-activations.
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Kaiming-style uniform fan-in init: U(−1/√fan_in, 1/√fan_in), seeded.
    pub fn new(dims: &[usize], acts: &[Activation], seed: u64) -> Result<Mlp, NeuralError> {
        if dims.len() < 2 || acts.len() != dims.len() - 1 {
            return Err(NeuralError::BadArchitecture(format!(
                "{} dims with {} activations",
                dims.len(),
                acts.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(acts.len());
        for (li, &act) in acts.iter().enumerate() {
            let (ni, no) = (dims[li], dims[li + 1]);
            let bound = 1.0 / (ni as f64).sqrt();
            let w = (0..ni * no)
                .map(|_| rng.gen_range(-bound..bound) as f32)
                .collect();
            let b = (0..no).map(|_| rng.gen_range(-bound..bound) as f32).collect();
            layers.push(Layer {
                w,
                b,
                act,
                in_dim: ni,
                out_dim: no,
            });
        }
        Ok(Mlp {
            layers,
            init_seed: seed,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.out_dim));
        d
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.act).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer_forward(layer, &a).0;
        }
        Ok(a)
    }

    /// Forward pass that keeps per-layer inputs and pre-activations.
    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache), NeuralError> {
        self.check_input(x)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            preacts: Vec::with_capacity(self.layers.len()),
        };
        let mut a = x.to_vec();
        for layer in &self.layers {
            cache.inputs.push(a.clone());
            let (out, z) = layer_forward(layer, &a);
            cache.preacts.push(z);
            a = out;
        }
        Ok((a, cache))
    }

    /// Reverse-mode gradients. `upstream` is dL/d(output); accumulates
    /// dL/d(params) into `grad` (flat layout, see `param_count`) and
    /// returns dL/d(input).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>, NeuralError> {
        if upstream.len() != self.out_dim() {
            return Err(NeuralError::DimMismatch {
                what: "upstream gradient",
                want: self.out_dim(),
                got: upstream.len(),
            });
        }
        if grad.len() != self.param_count() {
            return Err(NeuralError::DimMismatch {
                what: "gradient buffer",
                want: self.param_count(),
                got: grad.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0usize;
        for l in &self.layers {
            offsets.push(off);
            off += l.w.len() + l.b.len();
        }

        let mut da = upstream.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.preacts[li];
            let a_prev = &cache.inputs[li];
            // dz = da ⊙ act'(z)
            let mut dz = vec![0.0f64; layer.out_dim];
            for o in 0..layer.out_dim {
                dz[o] = da[o] * layer.act.derivative(z[o]);
            }
            let base = offsets[li];
            let (gw, gb) = grad[base..base + layer.w.len() + layer.b.len()]
                .split_at_mut(layer.w.len());
            for o in 0..layer.out_dim {
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                let d = dz[o];
                for (gi, ai) in row.iter_mut().zip(a_prev) {
                    *gi += d * ai;
                }
                gb[o] += d;
            }
            // da_prev = Wᵀ dz
            let mut da_prev = vec![0.0f64; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let d = dz[o];
                for (dp, wi) in da_prev.iter_mut().zip(row) {
                    *dp += d * (*wi as f64);
                }
            }
            da = da_prev;
        }
        Ok(da)
    }

    pub fn params_flat(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params_flat(&mut self, p: &[f32]) -> Result<(), NeuralError> {
        if p.len() != self.param_count() {
            return Err(NeuralError::DimMismatch {
                what: "parameter vector",
                want: self.param_count(),
                got: p.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let (wn, bn) = (l.w.len(), l.b.len());
            l.w.copy_from_slice(&p[off..off + wn]);
            off += wn;
            l.b.copy_from_slice(&p[off..off + bn]);
            off += bn;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.in_dim() {
            return Err(NeuralError::DimMismatch {
                what: "input",
                want: self.in_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[inline]
fn layer_forward(layer: &Layer, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut z = vec![0.0f64; layer.out_dim];
    for o in 0..layer.out_dim {
        let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
        let mut acc = layer.b[o] as f64;
        for (wi, ai) in row.iter().zip(a) {
            acc += (*wi as f64) * ai;
        }
        z[o] = acc;
    }
    let out = z.iter().map(|&v| layer.act.apply(v)).collect();
    (out, z)
}
