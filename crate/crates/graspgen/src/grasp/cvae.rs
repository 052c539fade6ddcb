//! Conditional VAE over hand-grasp parameters, conditioned on a BPS object
//! encoding and trained separately per hand side.
//!
//! The decoder emits a 29-d raw head: 20 hinge pre-activations (mapped by
//! tanh into joint limits, then expanded to 6-d rotation blocks), wrist
//! translation (3), and a raw 6-d wrist rotation. Training compares the
//! expanded 99-d vector against the target; inference additionally
//! orthonormalizes the wrist block.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GraspError;
use crate::body::tree::FLEX_MIN;
use crate::body::{
    finger_axes, FingerDofs, HandGraspParams, Side, ABD_MAX, FLEX_MAX, GRASP_DIM, HAND_DOF,
};
use crate::geom::{axis_angle_to_matrix, Rotation6D, BPS_POINTS};
use crate::neural::{parallel_accumulate, Activation, AdamState, Checkpoint, Mlp};
use crate::rng::derive_indexed_seed;

pub const LATENT_DIM: usize = 16;
pub const LOGVAR_CLAMP: f64 = 10.0;
pub const CVAE_HIDDEN: usize = 256;
/// Raw decoder head width: 20 hinge channels + t_h + 6-d wrist rotation.
pub const DECODER_RAW_DIM: usize = HAND_DOF + 3 + 6;
pub const DEFAULT_BETA_KL: f64 = 5e-3;
/// Checkpoint `kind` tag for grasp-model files.
pub const GRASP_CKPT_KIND: &str = "grasp-cvae";

/// KL weight with linear warmup over the first 10% of training.
pub fn beta_schedule(step: u64, total_steps: u64, beta: f64) -> f64 {
    let warmup = (total_steps / 10).max(1);
    beta * ((step as f64 / warmup as f64).min(1.0))
}

/// Closed-form KL(N(μ,σ²) ‖ N(0,1)) summed over latent dimensions.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum()
}

/// Per-channel hinge limits in the 20-DOF flat layout
/// (per finger: proximal flexion, abduction, middle flexion, distal flexion).
fn hinge_limits(k: usize) -> (f64, f64) {
    if k % 4 == 1 {
        (-ABD_MAX, ABD_MAX)
    } else {
        (FLEX_MIN, FLEX_MAX)
    }
}

/// Maps raw head channels into joint limits: a = center + half·tanh(u).
fn hinge_angles(raw: &[f64]) -> [f64; HAND_DOF] {
    let mut out = [0.0; HAND_DOF];
    for (k, o) in out.iter_mut().enumerate() {
        let (lo, hi) = hinge_limits(k);
        *o = 0.5 * (hi + lo) + 0.5 * (hi - lo) * raw[k].tanh();
    }
    out
}

/// Expands a raw 29-d decoder head into the 99-d grasp vector used for
/// reconstruction (wrist block left as-is).
fn raw_to_vec99(raw: &[f64], side: Side) -> Vec<f64> {
    let dofs = FingerDofs::from_flat_slice(&hinge_angles(raw));
    let blocks = dofs.to_blocks(side);
    let mut out = Vec::with_capacity(GRASP_DIM);
    for b in &blocks {
        out.extend_from_slice(&b.to_array());
    }
    out.extend_from_slice(&raw[HAND_DOF..HAND_DOF + 3]);
    out.extend_from_slice(&raw[HAND_DOF + 3..DECODER_RAW_DIM]);
    out
}

/// Pulls a 99-d gradient back to the 29-d raw head analytically.
/// dR(aθ)/dθ = [a]×·R for a fixed-axis rotation; the proximal block
/// composes abduction·flexion so each factor's derivative is chained.
fn raw_grad_from_vec99(raw: &[f64], side: Side, up99: &[f64]) -> Vec<f64> {
    let axes = finger_axes(side);
    let angles = hinge_angles(raw);
    let mut grad = vec![0.0; DECODER_RAW_DIM];
    for f in 0..5 {
        let flex_axis = axes[f].flex;
        let abd_axis = axes[f].abduct;
        let [a_pf, a_ab, a_mf, a_df] = [
            angles[4 * f],
            angles[4 * f + 1],
            angles[4 * f + 2],
            angles[4 * f + 3],
        ];
        let r_abd = axis_angle_to_matrix(&(abd_axis * a_ab));
        let r_flex = axis_angle_to_matrix(&(flex_axis * a_pf));
        let skew = |a: Vector3<f64>| -> Matrix3<f64> { a.cross_matrix() };

        // angle gradients for the three blocks of this finger
        let block_dot = |d: &Matrix3<f64>, off: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..2 {
                for r in 0..3 {
                    s += up99[off + c * 3 + r] * d[(r, c)];
                }
            }
            s
        };
        let prox_off = 18 * f;
        let d_prox_flex = r_abd * skew(flex_axis) * r_flex;
        let d_prox_abd = skew(abd_axis) * r_abd * r_flex;
        let mut da = [0.0; 4];
        da[0] = block_dot(&d_prox_flex, prox_off);
        da[1] = block_dot(&d_prox_abd, prox_off);
        let r_mid = axis_angle_to_matrix(&(flex_axis * a_mf));
        da[2] = block_dot(&(skew(flex_axis) * r_mid), prox_off + 6);
        let r_dist = axis_angle_to_matrix(&(flex_axis * a_df));
        da[3] = block_dot(&(skew(flex_axis) * r_dist), prox_off + 12);

        for (slot, dak) in da.iter().enumerate() {
            let k = 4 * f + slot;
            let (lo, hi) = hinge_limits(k);
            let th = raw[k].tanh();
            grad[k] = dak * 0.5 * (hi - lo) * (1.0 - th * th);
        }
    }
    grad[HAND_DOF..HAND_DOF + 3].copy_from_slice(&up99[90..93]);
    grad[HAND_DOF + 3..DECODER_RAW_DIM].copy_from_slice(&up99[93..99]);
    grad
}

/// Per-batch loss breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvaeLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Encoder/decoder pair for one hand side, tied to the BPS basis seed the
/// conditioning vectors were produced with.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspCvae {
    pub side: Side,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub bps_seed: u64,
}

impl GraspCvae {
    pub fn encoder_in() -> usize {
        GRASP_DIM + BPS_POINTS
    }

    pub fn decoder_in() -> usize {
        LATENT_DIM + BPS_POINTS
    }

    pub fn new(side: Side, init_seed: u64, bps_seed: u64) -> GraspCvae {
        Self::with_hidden(side, init_seed, bps_seed, CVAE_HIDDEN)
    }

    /// Same model with a custom hidden width (narrow nets keep property
    /// tests fast; production uses `CVAE_HIDDEN`).
    pub fn with_hidden(side: Side, init_seed: u64, bps_seed: u64, hidden: usize) -> GraspCvae {
        let encoder = Mlp::new(
            &[Self::encoder_in(), hidden, hidden, 2 * LATENT_DIM],
            &[Activation::Silu, Activation::Silu, Activation::Identity],
            derive_indexed_seed(init_seed, "cvae-encoder", side as u64),
        )
        .expect("fixed architecture is valid");
        let decoder = Mlp::new(
            &[Self::decoder_in(), hidden, hidden, DECODER_RAW_DIM],
            &[Activation::Silu, Activation::Silu, Activation::Identity],
            derive_indexed_seed(init_seed, "cvae-decoder", side as u64),
        )
        .expect("fixed architecture is valid");
        GraspCvae {
            side,
            encoder,
            decoder,
            bps_seed,
        }
    }

    fn check_bps(bps: &[f64]) -> Result<(), GraspError> {
        if bps.len() != BPS_POINTS {
            return Err(GraspError::DimMismatch {
                what: "BPS encoding",
                want: BPS_POINTS,
                got: bps.len(),
            });
        }
        Ok(())
    }

    /// BPS distances live in [0, radius]; rescale to unit range so the
    /// conditioning channels match the scale of the other net inputs.
    fn push_bps(input: &mut Vec<f64>, bps: &[f64]) {
        input.extend(bps.iter().map(|d| d / crate::geom::BPS_RADIUS));
    }

    /// Posterior parameters (μ, logσ²) for a grasp under this object.
    pub fn encode(
        &self,
        grasp: &HandGraspParams,
        bps: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), GraspError> {
        if grasp.side != self.side {
            return Err(GraspError::SideMismatch {
                want: self.side,
                got: grasp.side,
            });
        }
        Self::check_bps(bps)?;
        let mut input = grasp.to_vec99();
        Self::push_bps(&mut input, bps);
        let out = self.encoder.forward(&input)?;
        let mu = out[..LATENT_DIM].to_vec();
        let logvar = out[LATENT_DIM..]
            .iter()
            .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP))
            .collect();
        Ok((mu, logvar))
    }

    /// Deterministic decode of a latent code under an object encoding.
    pub fn decode(&self, z: &[f64], bps: &[f64]) -> Result<HandGraspParams, GraspError> {
        if z.len() != LATENT_DIM {
            return Err(GraspError::DimMismatch {
                what: "latent code",
                want: LATENT_DIM,
                got: z.len(),
            });
        }
        Self::check_bps(bps)?;
        let mut input = z.to_vec();
        Self::push_bps(&mut input, bps);
        let raw = self.decoder.forward(&input)?;
        Ok(self.raw_to_grasp(&raw))
    }

    fn raw_to_grasp(&self, raw: &[f64]) -> HandGraspParams {
        let dofs = FingerDofs::from_flat_slice(&hinge_angles(raw));
        let t_h = Vector3::new(raw[HAND_DOF], raw[HAND_DOF + 1], raw[HAND_DOF + 2]);
        let r6 = Rotation6D::from_slice(&raw[HAND_DOF + 3..DECODER_RAW_DIM]);
        // A generic decoder head is never exactly degenerate; fall back to
        // identity rather than failing inference if it ever is.
        let r_h = match r6.to_matrix() {
            Ok(m) => Rotation6D::from_matrix(&m),
            Err(_) => Rotation6D::identity(),
        };
        HandGraspParams::from_dofs(&dofs, t_h, r_h, self.side)
    }

    /// Draws z ~ temperature·N(0,I) from `seed` and decodes it.
    /// temperature 0 uses the prior mean exactly (z = 0).
    pub fn sample_grasp(
        &self,
        bps: &[f64],
        seed: u64,
        temperature: f64,
    ) -> Result<HandGraspParams, GraspError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..LATENT_DIM)
            .map(|_| {
                let n: f64 = StandardNormal.sample(&mut rng);
                temperature * n
            })
            .collect();
        self.decode(&z, bps)
    }

    /// One optimizer step of reconstruction MSE + β·KL over a batch of
    /// (bps, target grasp99) pairs (all of this model's side). Both nets
    /// share one optimizer over the concatenated parameter vector.
    pub fn train_step(
        &mut self,
        batch: &[(Vec<f64>, Vec<f64>)],
        opt: &mut AdamState,
        beta_kl: f64,
        seed: u64,
    ) -> Result<CvaeLoss, GraspError> {
        if batch.is_empty() {
            return Err(GraspError::EmptyBatch);
        }
        let enc_params = self.encoder.param_count();
        let total_params = enc_params + self.decoder.param_count();
        let inv_b = 1.0 / batch.len() as f64;
        let side = self.side;
        let encoder = &self.encoder;
        let decoder = &self.decoder;
        let acc = parallel_accumulate(batch.len(), total_params + 2, |i, acc| {
            let (bps, target99) = &batch[i];
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_indexed_seed(seed, "cvae-item", i as u64));
            let mut enc_in = target99.clone();
            Self::push_bps(&mut enc_in, bps);
            let (enc_out, enc_cache) = encoder
                .forward_cached(&enc_in)
                .expect("encoder input sized");
            let mu = &enc_out[..LATENT_DIM];
            let lv_raw = &enc_out[LATENT_DIM..];
            let lv: Vec<f64> = lv_raw
                .iter()
                .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP))
                .collect();
            let eps: Vec<f64> = (0..LATENT_DIM)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let sigma: Vec<f64> = lv.iter().map(|v| (0.5 * v).exp()).collect();
            let z: Vec<f64> = (0..LATENT_DIM)
                .map(|k| mu[k] + sigma[k] * eps[k])
                .collect();

            let mut dec_in = z.clone();
            Self::push_bps(&mut dec_in, bps);
            let (raw, dec_cache) = decoder
                .forward_cached(&dec_in)
                .expect("decoder input sized");
            let recon = raw_to_vec99(&raw, side);

            let mut up99 = vec![0.0; GRASP_DIM];
            let mut recon_loss = 0.0;
            for j in 0..GRASP_DIM {
                let r = recon[j] - target99[j];
                recon_loss += r * r / GRASP_DIM as f64;
                up99[j] = 2.0 * r / (GRASP_DIM as f64) * inv_b;
            }
            let kl = kl_divergence(mu, &lv);
            // Stash the scalar terms in the two extra accumulator slots.
            acc.loss += (recon_loss + beta_kl * kl) * inv_b;
            acc.grad[total_params] += recon_loss * inv_b;
            acc.grad[total_params + 1] += kl * inv_b;

            let up_raw = raw_grad_from_vec99(&raw, side, &up99);
            let (grad_body, _) = acc.grad.split_at_mut(total_params);
            let (grad_enc, grad_dec) = grad_body.split_at_mut(enc_params);
            let d_dec_in = decoder
                .backward(&dec_cache, &up_raw, grad_dec)
                .expect("decoder gradient buffer sized");
            let dz = &d_dec_in[..LATENT_DIM];

            let mut up_enc = vec![0.0; 2 * LATENT_DIM];
            for k in 0..LATENT_DIM {
                // dL/dμ = dL/dz + β·μ/B ; dL/dlv = dL/dz·ε·σ/2 + β·(σ²−1)/2/B
                up_enc[k] = dz[k] + beta_kl * mu[k] * inv_b;
                let mut dlv = dz[k] * eps[k] * sigma[k] * 0.5
                    + beta_kl * 0.5 * (lv[k].exp() - 1.0) * inv_b;
                // The clamp has zero slope outside its range.
                if lv_raw[k].abs() > LOGVAR_CLAMP {
                    dlv = 0.0;
                }
                up_enc[LATENT_DIM + k] = dlv;
            }
            encoder
                .backward(&enc_cache, &up_enc, grad_enc)
                .expect("encoder gradient buffer sized");
        });
        if !acc.loss.is_finite() {
            return Err(GraspError::NonFiniteLoss {
                step: opt.step,
                loss: acc.loss,
            });
        }
        let loss = CvaeLoss {
            total: acc.loss,
            recon: acc.grad[total_params],
            kl: acc.grad[total_params + 1],
        };
        let mut params = self.encoder.params_flat();
        params.extend_from_slice(&self.decoder.params_flat());
        opt.step(&mut params, &acc.grad[..total_params])?;
        self.encoder.set_params_flat(&params[..enc_params])?;
        self.decoder.set_params_flat(&params[enc_params..])?;
        Ok(loss)
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let mut meta = serde_json::json!({
            "kind": GRASP_CKPT_KIND,
            "side": self.side.label(),
            "bps_seed": self.bps_seed,
        });
        if let Some(obj) = extra.as_object() {
            for (k, v) in obj {
                meta[k] = v.clone();
            }
        }
        let mut cp = Checkpoint::new(meta);
        cp.insert_mlp("encoder", &self.encoder);
        cp.insert_mlp("decoder", &self.decoder);
        cp
    }

    pub fn from_checkpoint(cp: &Checkpoint) -> Result<GraspCvae, GraspError> {
        let kind = cp.metadata["kind"].as_str().unwrap_or("");
        if kind != GRASP_CKPT_KIND {
            return Err(GraspError::WrongCheckpoint(format!(
                "kind `{kind}`, expected `{GRASP_CKPT_KIND}`"
            )));
        }
        let side: Side = cp.metadata["side"]
            .as_str()
            .unwrap_or("")
            .parse()
            .map_err(|_| GraspError::WrongCheckpoint("missing side".into()))?;
        let bps_seed = cp.metadata["bps_seed"].as_u64().ok_or_else(|| {
            GraspError::WrongCheckpoint("missing bps_seed".into())
        })?;
        let encoder = cp.mlp("encoder")?;
        let decoder = cp.mlp("decoder")?;
        if encoder.in_dim() != Self::encoder_in()
            || encoder.out_dim() != 2 * LATENT_DIM
            || decoder.in_dim() != Self::decoder_in()
            || decoder.out_dim() != DECODER_RAW_DIM
        {
            return Err(GraspError::WrongCheckpoint(
                "network dimensions do not match the grasp model".into(),
            ));
        }
        Ok(GraspCvae {
            side,
            encoder,
            decoder,
            bps_seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::tree::FINGERS;
    use rand::Rng;

    fn toy_bps(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..BPS_POINTS).map(|_| rng.gen_range(0.0..0.15)).collect()
    }

    fn toy_grasp(seed: u64, side: Side) -> HandGraspParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dofs = FingerDofs::flat();
        for f in 0..5 {
            dofs.dof[f][0] = rng.gen_range(0.2..1.2);
            dofs.dof[f][1] = rng.gen_range(-0.2..0.2);
            dofs.dof[f][2] = rng.gen_range(0.2..1.2);
            dofs.dof[f][3] = rng.gen_range(0.1..0.8);
        }
        let t = Vector3::new(
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.1..0.1),
        );
        let r = Rotation6D::from_matrix(&axis_angle_to_matrix(&Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )));
        HandGraspParams::from_dofs(&dofs.clamped(), t, r, side)
    }

    #[test]
    fn kl_closed_form_values() {
        assert_eq!(kl_divergence(&[0.0; 16], &[0.0; 16]), 0.0);
        // Per-dim contribution for (μ=1, logσ²=0) is ½·(1+1−1−0) = 0.5.
        assert_eq!(kl_divergence(&[1.0], &[0.0]), 0.5);
        let kl = kl_divergence(&[1.0; 4], &[0.0; 4]);
        assert_eq!(kl, 2.0);
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let mu: [f64; 3] = [0.3, -1.2, 0.8];
        let lv: [f64; 3] = [0.4, -0.9, 0.1];
        let h = 1e-5;
        for k in 0..3 {
            let an_mu = mu[k];
            let an_lv = 0.5 * (lv[k].exp() - 1.0);
            let mut mp = mu;
            mp[k] += h;
            let mut mm = mu;
            mm[k] -= h;
            let fd_mu = (kl_divergence(&mp, &lv) - kl_divergence(&mm, &lv)) / (2.0 * h);
            assert!((an_mu - fd_mu).abs() / fd_mu.abs().max(1e-6) < 1e-3);
            let mut lp = lv;
            lp[k] += h;
            let mut lm = lv;
            lm[k] -= h;
            let fd_lv = (kl_divergence(&mu, &lp) - kl_divergence(&mu, &lm)) / (2.0 * h);
            assert!((an_lv - fd_lv).abs() / fd_lv.abs().max(1e-6) < 1e-3);
        }
    }

    #[test]
    fn zero_weight_encoder_gives_standard_posterior() {
        let mut model = GraspCvae::new(Side::Right, 3, 17);
        model
            .encoder
            .set_params_flat(&vec![0.0; model.encoder.param_count()])
            .unwrap();
        let (mu, lv) = model
            .encode(&toy_grasp(1, Side::Right), &toy_bps(2))
            .unwrap();
        assert_eq!(mu, vec![0.0; LATENT_DIM]);
        assert_eq!(lv, vec![0.0; LATENT_DIM]);
        assert_eq!(kl_divergence(&mu, &lv), 0.0);
    }

    #[test]
    fn encode_rejects_wrong_side_and_bad_dims() {
        let model = GraspCvae::new(Side::Right, 3, 17);
        assert!(matches!(
            model.encode(&toy_grasp(1, Side::Left), &toy_bps(2)),
            Err(GraspError::SideMismatch { .. })
        ));
        assert!(matches!(
            model.encode(&toy_grasp(1, Side::Right), &[0.1; 5]),
            Err(GraspError::DimMismatch { .. })
        ));
    }

    #[test]
    fn decode_is_deterministic_valid_and_within_limits() {
        let model = GraspCvae::new(Side::Left, 9, 17);
        let bps = toy_bps(4);
        let z = vec![0.3; LATENT_DIM];
        let a = model.decode(&z, &bps).unwrap();
        let b = model.decode(&z, &bps).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_vec99().len(), GRASP_DIM);
        assert_eq!(a.side, Side::Left);
        assert!(a.is_valid());
        // The tanh head cannot leave the hinge ranges whatever the raw
        // output is.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..HAND_DOF).map(|_| rng.gen_range(-30.0..30.0)).collect();
            let angles = hinge_angles(&raw);
            let dofs = FingerDofs::from_flat_slice(&angles);
            assert!(dofs.is_within_limits());
        }
    }

    #[test]
    fn temperature_zero_equals_prior_mean_decode() {
        let model = GraspCvae::new(Side::Right, 11, 17);
        let bps = toy_bps(5);
        let a = model.sample_grasp(&bps, 999, 0.0).unwrap();
        let b = model.decode(&vec![0.0; LATENT_DIM], &bps).unwrap();
        assert_eq!(a, b);
        // Nonzero temperature actually moves the sample.
        let c = model.sample_grasp(&bps, 999, 1.0).unwrap();
        assert_ne!(a, c);
        // Fixed seed → deterministic.
        let d = model.sample_grasp(&bps, 999, 1.0).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn raw_head_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for side in [Side::Right, Side::Left] {
            let raw: Vec<f64> = (0..DECODER_RAW_DIM).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let up99: Vec<f64> = (0..GRASP_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let analytic = raw_grad_from_vec99(&raw, side, &up99);
            let h = 1e-6;
            let f = |r: &[f64]| -> f64 {
                raw_to_vec99(r, side)
                    .iter()
                    .zip(&up99)
                    .map(|(a, b)| a * b)
                    .sum()
            };
            for k in 0..DECODER_RAW_DIM {
                let mut rp = raw.clone();
                rp[k] += h;
                let mut rm = raw.clone();
                rm[k] -= h;
                let fd = (f(&rp) - f(&rm)) / (2.0 * h);
                let denom = analytic[k].abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic[k] - fd).abs() / denom < 1e-3,
                    "{side:?} channel {k}: analytic {} vs fd {fd}",
                    analytic[k]
                );
            }
        }
    }

    #[test]
    fn memorizes_single_sample_with_zero_beta() {
        let mut model = GraspCvae::with_hidden(Side::Right, 5, 17, 64);
        let bps = toy_bps(6);
        let target = toy_grasp(7, Side::Right).to_vec99();
        let batch = vec![(bps, target)];
        let n_params = model.encoder.param_count() + model.decoder.param_count();
        let mut opt = AdamState::new(n_params, 2e-3);
        let first = model.train_step(&batch, &mut opt, 0.0, 0).unwrap();
        let mut last = first;
        for s in 1..2000 {
            last = model.train_step(&batch, &mut opt, 0.0, s).unwrap();
        }
        assert!(
            last.recon < 1e-3,
            "reconstruction MSE {} after memorization",
            last.recon
        );
        assert!(last.recon < first.recon);
        // β=0 leaves KL unconstrained; only reconstruction must fall.
        assert!(last.kl.is_finite());
    }

    #[test]
    fn matched_conditioning_beats_shuffled() {
        // Conditions come from a two-parameter family (as BPS encodings of
        // a parametric object family would) and targets are a function of
        // the same parameters. Training runs use a strong KL weight so the
        // latent cannot smuggle the target past the condition, and the
        // evaluation decodes the prior mean so only the conditioning path
        // can explain held-out pairs. Mispairing conditions and targets
        // must then be strictly worse, for every seed.
        let family_bps = |u: f64, v: f64| -> Vec<f64> {
            (0..BPS_POINTS)
                .map(|i| {
                    let s = (0.1 * i as f64).sin();
                    let c = (0.07 * i as f64).cos();
                    0.075 + 0.035 * (u * 2.0 - 1.0) * s + 0.035 * (v * 2.0 - 1.0) * c
                })
                .collect()
        };
        let rule = |u: f64, v: f64| -> Vec<f64> {
            let mut dofs = FingerDofs::flat();
            dofs.dof[1][0] = u * 1.4;
            let t = Vector3::new(0.3 * (2.0 * u - 1.0), 0.3 * (2.0 * v - 1.0), 0.3 * (u - v));
            HandGraspParams::from_dofs(&dofs, t, Rotation6D::identity(), Side::Right).to_vec99()
        };
        let make_set = |seed: u64, n: usize| -> Vec<(Vec<f64>, Vec<f64>)> {
            (0..n)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed_seed(
                        seed, "set", i as u64,
                    ));
                    let (u, v): (f64, f64) =
                        (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                    (family_bps(u, v), rule(u, v))
                })
                .collect()
        };
        let heldout = make_set(100, 12);
        let eval = |model: &GraspCvae| -> f64 {
            heldout
                .iter()
                .map(|(bps, t99)| {
                    let g = model
                        .decode(&vec![0.0; LATENT_DIM], bps)
                        .unwrap()
                        .to_vec99();
                    g.iter().zip(t99).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                        / GRASP_DIM as f64
                })
                .sum::<f64>()
                / heldout.len() as f64
        };
        for seed in [1u64, 2, 3] {
            let train = make_set(seed, 32);
            let mut shuffled = train.clone();
            shuffled.rotate_right(1); // conditions shift by one, targets stay
            for (dst, src) in shuffled.iter_mut().zip(&train) {
                dst.1 = src.1.clone();
            }
            let fit = |data: &[(Vec<f64>, Vec<f64>)]| -> GraspCvae {
                let mut m = GraspCvae::with_hidden(Side::Right, seed, 17, 64);
                let n = m.encoder.param_count() + m.decoder.param_count();
                let mut opt = AdamState::new(n, 2e-3);
                for s in 0..300usize {
                    // Rotating mini-batches of 16 over the 32-pair set.
                    let lo = (s * 16) % data.len();
                    let batch: Vec<_> =
                        (0..16).map(|k| data[(lo + k) % data.len()].clone()).collect();
                    m.train_step(&batch, &mut opt, 0.25, s as u64).unwrap();
                }
                m
            };
            let matched = eval(&fit(&train));
            let mismatched = eval(&fit(&shuffled));
            assert!(
                matched < mismatched,
                "seed {seed}: matched {matched} vs mismatched {mismatched}"
            );
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_kind_guard() {
        let model = GraspCvae::new(Side::Left, 13, 99);
        let cp = model.to_checkpoint(serde_json::json!({"data_seed": 4}));
        let bytes = cp.to_bytes();
        let restored = GraspCvae::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(restored, model);
        assert_eq!(restored.side, Side::Left);
        assert_eq!(restored.bps_seed, 99);
        // A pose checkpoint must be refused.
        let other = Checkpoint::new(serde_json::json!({"kind": "pose-denoiser"}));
        assert!(matches!(
            GraspCvae::from_checkpoint(&other),
            Err(GraspError::WrongCheckpoint(_))
        ));
    }

    #[test]
    fn beta_warmup_is_linear_then_flat() {
        assert_eq!(beta_schedule(0, 1000, 5e-3), 0.0);
        assert_eq!(beta_schedule(50, 1000, 5e-3), 2.5e-3);
        assert_eq!(beta_schedule(100, 1000, 5e-3), 5e-3);
        assert_eq!(beta_schedule(900, 1000, 5e-3), 5e-3);
    }

    #[test]
    fn fingers_table_is_five_long() {
        // raw_grad_from_vec99 indexes all five fingers; guard the table.
        assert_eq!(FINGERS.len(), 5);
    }
}
