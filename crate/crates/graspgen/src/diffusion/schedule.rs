//! Cosine noise schedule for the pose denoising chain.

use super::DiffusionError;

pub const DEFAULT_STEPS: usize = 1000;
/// Small offset in the cosine schedule that keeps β_1 away from zero.
pub const COSINE_S: f64 = 0.008;
/// Upper clip applied to per-step β to avoid a singular final step.
pub const BETA_CLIP: f64 = 0.999;

/// Precomputed forward-process coefficients. `alpha_bar` holds T+1 values
/// (index 0 is the no-noise level ᾱ_0 = 1); `beta`/`alpha` are indexed by
/// step t ∈ 1..=T via `beta[t-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub alpha_bar: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl NoiseSchedule {
    /// ᾱ_t = f(t)/f(0) with f(t) = cos²(((t/T + s)/(1 + s))·π/2), s = 0.008.
    pub fn cosine(steps: usize) -> NoiseSchedule {
        assert!(steps >= 1, "schedule needs at least one step");
        let f = |t: f64| -> f64 {
            let x = (t / steps as f64 + COSINE_S) / (1.0 + COSINE_S) * std::f64::consts::FRAC_PI_2;
            x.cos().powi(2)
        };
        let f0 = f(0.0);
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        let mut beta = Vec::with_capacity(steps);
        let mut alpha = Vec::with_capacity(steps);
        alpha_bar.push(1.0);
        for t in 1..=steps {
            let raw = (f(t as f64) / f0).clamp(0.0, 1.0);
            let prev = alpha_bar[t - 1];
            let b = (1.0 - raw / prev).clamp(0.0, BETA_CLIP);
            let a = 1.0 - b;
            beta.push(b);
            alpha.push(a);
            // Rebuild ᾱ from the clipped β so the triplet stays consistent.
            alpha_bar.push(prev * a);
        }
        NoiseSchedule {
            steps,
            alpha_bar,
            beta,
            alpha,
        }
    }

    pub fn check_step(&self, t: usize) -> Result<(), DiffusionError> {
        if t < 1 || t > self.steps {
            return Err(DiffusionError::StepOutOfRange {
                t,
                steps: self.steps,
            });
        }
        Ok(())
    }

    /// Forward sample x_t = √ᾱ_t · x0 + √(1−ᾱ_t) · ε.
    pub fn q_sample(&self, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>, DiffusionError> {
        self.check_step(t)?;
        if x0.len() != eps.len() {
            return Err(DiffusionError::DimMismatch {
                what: "noise vector",
                want: x0.len(),
                got: eps.len(),
            });
        }
        let ab = self.alpha_bar[t];
        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(eps).map(|(x, e)| sa * x + sb * e).collect())
    }

    /// Posterior variance β̃_t = (1−ᾱ_{t−1})/(1−ᾱ_t) · β_t, zero at t=1.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        let denom = 1.0 - self.alpha_bar[t];
        if denom <= 0.0 {
            return 0.0;
        }
        (1.0 - self.alpha_bar[t - 1]) / denom * self.beta[t - 1]
    }

    /// Reverse-step mean μ_t = (x_t − β_t/√(1−ᾱ_t) · ε̂) / √α_t.
    pub fn reverse_mean(&self, x_t: &[f64], t: usize, eps_hat: &[f64]) -> Vec<f64> {
        let b = self.beta[t - 1];
        let coeff = b / (1.0 - self.alpha_bar[t]).sqrt();
        let inv_sqrt_a = 1.0 / self.alpha[t - 1].sqrt();
        x_t.iter()
            .zip(eps_hat)
            .map(|(x, e)| inv_sqrt_a * (x - coeff * e))
            .collect()
    }
}
