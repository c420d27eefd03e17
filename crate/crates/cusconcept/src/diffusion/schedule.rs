//! Forward noising schedule shared by all backends.

use crate::diffusion::{LatentCode, NoisedLatent};
use crate::error::{Error, Result};

/// Variance schedule with precomputed cumulative signal/noise coefficients.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta schedule over `steps` timesteps.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Self {
        assert!(steps >= 2);
        let mut betas = Vec::with_capacity(steps);
        for i in 0..steps {
            let frac = i as f64 / (steps - 1) as f64;
            betas.push(beta_start + (beta_end - beta_start) * frac);
        }
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for beta in &betas {
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        NoiseSchedule { betas, alpha_bar }
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// sqrt(ᾱ_t), the coefficient on the clean latent.
    pub fn signal_coeff(&self, t: usize) -> f64 {
        self.alpha_bar[t].sqrt()
    }

    /// sqrt(1 − ᾱ_t), the coefficient on the noise sample.
    pub fn noise_coeff(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar[t]).sqrt()
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.len() {
            return Err(Error::InvalidTimestep { t, max: self.len() });
        }
        Ok(())
    }

    /// z_t = sqrt(ᾱ_t)·z + sqrt(1 − ᾱ_t)·ε. Linear in (z, ε) for fixed t.
    pub fn add_noise(
        &self,
        z: &LatentCode,
        t: usize,
        noise: &LatentCode,
        noise_seed: Option<u64>,
    ) -> Result<NoisedLatent> {
        self.check_t(t)?;
        if noise.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), got: noise.len() });
        }
        let cs = self.signal_coeff(t);
        let cn = self.noise_coeff(t);
        let data: Vec<f64> = z
            .data()
            .iter()
            .zip(noise.data())
            .map(|(zv, nv)| cs * zv + cn * nv)
            .collect();
        Ok(NoisedLatent {
            z_t: LatentCode::like(z, data),
            t,
            noise: noise.clone(),
            noise_seed,
        })
    }
}
