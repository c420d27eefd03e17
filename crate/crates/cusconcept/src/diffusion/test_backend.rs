//! Stub backend with a configurable noise prediction, for loss-contract and
//! divergence tests.

use std::cell::Cell;

use crate::diffusion::{
    mean_squared_error, DiffusionBackend, Geometry, ImageTensor, LatentCode, NoiseSchedule,
    NoisedLatent,
};
use crate::error::Result;

pub enum StubPrediction {
    Zeros,
    Fixed(Vec<f64>),
}

pub struct StubBackend {
    pub geometry: Geometry,
    pub embed_dim: usize,
    pub schedule: NoiseSchedule,
    pub prediction: StubPrediction,
    /// When set, loss turns NaN once this many loss evaluations have run.
    pub nan_after: Option<usize>,
    calls: Cell<usize>,
}

impl StubBackend {
    pub fn new(geometry: Geometry, embed_dim: usize, prediction: StubPrediction) -> Self {
        StubBackend {
            geometry,
            embed_dim,
            schedule: NoiseSchedule::linear(100, 1e-4, 0.02),
            prediction,
            nan_after: None,
            calls: Cell::new(0),
        }
    }
}

impl DiffusionBackend for StubBackend {
    fn id(&self) -> String {
        "stub".into()
    }

    fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    fn image_geometry(&self) -> Geometry {
        self.geometry
    }

    fn latent_geometry(&self) -> Geometry {
        self.geometry
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn encode_image(&self, image: &ImageTensor) -> Result<LatentCode> {
        let g = image.geometry();
        LatentCode::new(g.channels, g.height, g.width, image.data().to_vec())
    }

    fn decode_latent(&self, latent: &LatentCode) -> Result<ImageTensor> {
        let g = latent.geometry();
        ImageTensor::new(g.channels, g.height, g.width, latent.data().to_vec())
    }

    fn predict_noise(&self, z_t: &LatentCode, _t: usize, cond: &[Vec<f64>]) -> Result<LatentCode> {
        self.check_latent(z_t)?;
        self.check_cond(cond)?;
        let data = match &self.prediction {
            StubPrediction::Zeros => vec![0.0; self.geometry.len()],
            StubPrediction::Fixed(values) => values.clone(),
        };
        Ok(LatentCode::like(z_t, data))
    }

    fn loss_with_cond_grad(
        &self,
        noised: &NoisedLatent,
        cond: &[Vec<f64>],
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let calls = self.calls.get() + 1;
        self.calls.set(calls);
        let grads = vec![vec![0.0; self.embed_dim]; cond.len()];
        if let Some(limit) = self.nan_after {
            if calls > limit {
                return Ok((f64::NAN, grads));
            }
        }
        let predicted = self.predict_noise(&noised.z_t, noised.t, cond)?;
        Ok((mean_squared_error(&noised.noise, &predicted)?, grads))
    }

    fn params_fingerprint(&self) -> String {
        "stub".into()
    }
}
