//! Contract for the frozen latent diffusion model: image encoding, noising,
//! conditional noise prediction, denoising-loss evaluation, and sampling.
//!
//! Two implementations ship here: [`TinyBackend`], a deterministic CPU model
//! small enough to finite-difference in tests, and the `pretrained` loader
//! surface for full checkpoints. Model weights are immutable after load and
//! shareable across concurrent loss evaluations.

mod pretrained;
mod schedule;
mod tiny;

use crate::embedding::TokenId;
use crate::error::{Error, Result};
use crate::math::{all_finite, DetRng};

pub use pretrained::PretrainedBackend;
pub use schedule::NoiseSchedule;
pub use tiny::TinyBackend;

/// Channel-major grid shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Geometry {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A decoded image as channel-major floats in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    geometry: Geometry,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let geometry = Geometry { channels, height, width };
        if data.len() != geometry.len() {
            return Err(Error::DimensionMismatch { expected: geometry.len(), got: data.len() });
        }
        if !all_finite(&data) {
            return Err(Error::InvalidImage { reason: "non-finite pixel values".into() });
        }
        Ok(ImageTensor { geometry, data })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Spatial latent code z in the backend's declared latent shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    geometry: Geometry,
    data: Vec<f64>,
}

impl LatentCode {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let geometry = Geometry { channels, height, width };
        if data.len() != geometry.len() {
            return Err(Error::DimensionMismatch { expected: geometry.len(), got: data.len() });
        }
        if !all_finite(&data) {
            return Err(Error::InvalidImage { reason: "non-finite latent values".into() });
        }
        Ok(LatentCode { geometry, data })
    }

    pub fn like(other: &LatentCode, data: Vec<f64>) -> LatentCode {
        debug_assert_eq!(data.len(), other.data.len());
        LatentCode { geometry: other.geometry, data }
    }

    pub fn zeros(geometry: Geometry) -> LatentCode {
        LatentCode { geometry, data: vec![0.0; geometry.len()] }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// A latent noised to timestep `t`, keeping the exact noise sample so the
/// denoising loss can be evaluated against it.
#[derive(Debug, Clone)]
pub struct NoisedLatent {
    pub z_t: LatentCode,
    pub t: usize,
    pub noise: LatentCode,
    pub noise_seed: Option<u64>,
}

/// Text conditioning: a token id sequence whose embedding rows are resolved
/// through the embedding space at loss time, never cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub ids: Vec<TokenId>,
}

impl Condition {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Condition { ids }
    }

    pub fn resolve(&self, space: &crate::embedding::EmbeddingSpace) -> Result<Vec<Vec<f64>>> {
        space.resolve(&self.ids)
    }
}

pub trait DiffusionBackend {
    /// Identifier recorded in manifests and reports.
    fn id(&self) -> String;

    /// Token-embedding width the conditioning rows must have.
    fn embed_dim(&self) -> usize;

    fn image_geometry(&self) -> Geometry;

    fn latent_geometry(&self) -> Geometry;

    fn schedule(&self) -> &NoiseSchedule;

    /// Deterministic for a fixed backend and image.
    fn encode_image(&self, image: &ImageTensor) -> Result<LatentCode>;

    fn decode_latent(&self, latent: &LatentCode) -> Result<ImageTensor>;

    /// ε̂ = ε_θ(z_t, t, condition rows).
    fn predict_noise(&self, z_t: &LatentCode, t: usize, cond: &[Vec<f64>]) -> Result<LatentCode>;

    /// Denoising loss together with its gradient with respect to each
    /// conditioning embedding row. Base-model parameters receive no updates.
    fn loss_with_cond_grad(
        &self,
        noised: &NoisedLatent,
        cond: &[Vec<f64>],
    ) -> Result<(f64, Vec<Vec<f64>>)>;

    /// Checksum over every denoiser + encoder parameter.
    fn params_fingerprint(&self) -> String;

    /// z_t for the backend's forward schedule.
    fn add_noise(&self, z: &LatentCode, t: usize, noise: &LatentCode) -> Result<NoisedLatent> {
        self.check_latent(z)?;
        self.schedule().add_noise(z, t, noise, None)
    }

    /// ‖ε − ε̂‖² averaged over all latent elements.
    ///
    /// Routed through `predict_noise`, independently of the gradient path in
    /// `loss_with_cond_grad`, so the two can cross-check each other.
    fn denoise_loss(&self, noised: &NoisedLatent, cond: &[Vec<f64>]) -> Result<f64> {
        let predicted = self.predict_noise(&noised.z_t, noised.t, cond)?;
        mean_squared_error(&noised.noise, &predicted)
    }

    /// Deterministic DDIM-style sampler; fixed (backend, seed, steps, cond)
    /// always yields the same image.
    fn sample(&self, cond: &[Vec<f64>], steps: usize, seed: u64) -> Result<ImageTensor> {
        let steps = steps.max(1);
        let geometry = self.latent_geometry();
        let mut rng = DetRng::derive(seed, "sample-init");
        let mut z = LatentCode::new(
            geometry.channels,
            geometry.height,
            geometry.width,
            rng.normal_vec(geometry.len()),
        )?;

        let t_max = self.schedule().len() - 1;
        let mut timesteps: Vec<usize> = (0..steps)
            .map(|i| t_max - i * t_max / steps)
            .collect();
        timesteps.dedup();

        for (i, &t) in timesteps.iter().enumerate() {
            let eps = self.predict_noise(&z, t, cond)?;
            let ab_t = self.schedule().alpha_bar(t);
            let x0: Vec<f64> = z
                .data()
                .iter()
                .zip(eps.data())
                .map(|(zv, ev)| ((zv - (1.0 - ab_t).sqrt() * ev) / ab_t.sqrt()).clamp(-1.5, 1.5))
                .collect();
            let next = timesteps.get(i + 1).copied();
            match next {
                Some(t_prev) => {
                    let ab_prev = self.schedule().alpha_bar(t_prev);
                    let data: Vec<f64> = x0
                        .iter()
                        .zip(eps.data())
                        .map(|(x, ev)| ab_prev.sqrt() * x + (1.0 - ab_prev).sqrt() * ev)
                        .collect();
                    z = LatentCode::like(&z, data);
                }
                None => {
                    z = LatentCode::like(&z, x0);
                }
            }
        }
        self.decode_latent(&z)
    }

    fn check_latent(&self, z: &LatentCode) -> Result<()> {
        let expected = self.latent_geometry();
        if z.geometry() != expected {
            return Err(Error::DimensionMismatch { expected: expected.len(), got: z.len() });
        }
        Ok(())
    }

    fn check_cond(&self, cond: &[Vec<f64>]) -> Result<()> {
        for row in cond {
            if row.len() != self.embed_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.embed_dim(),
                    got: row.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn mean_squared_error(target: &LatentCode, predicted: &LatentCode) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: predicted.len() });
    }
    let n = target.len() as f64;
    Ok(target
        .data()
        .iter()
        .zip(predicted.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Draw a unit-normal noise sample in the backend's latent shape.
pub fn sample_noise(geometry: Geometry, rng: &mut DetRng) -> LatentCode {
    LatentCode {
        geometry,
        data: rng.normal_vec(geometry.len()),
    }
}

#[cfg(test)]
pub(crate) mod test_backend;
