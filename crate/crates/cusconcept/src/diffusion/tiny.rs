//! Tiny deterministic test backend: 4-channel 8x8 latents, an identity
//! image encoder, and a seeded 2-layer convolutional noise predictor over a
//! 100-step linear schedule. Small enough that losses, gradients, and whole
//! training runs are checkable in seconds on a CPU.

use crate::diffusion::{
    DiffusionBackend, Geometry, ImageTensor, LatentCode, NoiseSchedule, NoisedLatent,
};
use crate::error::{Error, Result};
use crate::math::{DetRng, Fingerprint};

const CHANNELS: usize = 4;
const SIDE: usize = 8;
const HIDDEN: usize = 16;
const TIME_FEATURES: usize = 4;
const KSIZE: usize = 3;

pub struct TinyBackend {
    seed: u64,
    embed_dim: usize,
    schedule: NoiseSchedule,
    // conv1: CHANNELS -> HIDDEN, 3x3, same padding
    conv1_w: Vec<f64>,
    conv1_b: Vec<f64>,
    // conv2: HIDDEN -> CHANNELS, 3x3, same padding
    conv2_w: Vec<f64>,
    conv2_b: Vec<f64>,
    // mean-pooled condition row -> per-channel bias on the hidden layer
    cond_w: Vec<f64>, // HIDDEN x embed_dim
    // timestep features -> per-channel bias on the hidden layer
    time_w: Vec<f64>, // HIDDEN x TIME_FEATURES
}

impl TinyBackend {
    pub fn new(seed: u64, embed_dim: usize) -> Self {
        let mut rng = DetRng::derive(seed, "tiny-backend");
        let conv1_len = HIDDEN * CHANNELS * KSIZE * KSIZE;
        let conv2_len = CHANNELS * HIDDEN * KSIZE * KSIZE;
        let fan1 = (CHANNELS * KSIZE * KSIZE) as f64;
        let fan2 = (HIDDEN * KSIZE * KSIZE) as f64;
        TinyBackend {
            seed,
            embed_dim,
            schedule: NoiseSchedule::linear(100, 1e-4, 0.02),
            conv1_w: scaled(&mut rng, conv1_len, 1.0 / fan1.sqrt()),
            conv1_b: scaled(&mut rng, HIDDEN, 0.05),
            conv2_w: scaled(&mut rng, conv2_len, 1.0 / fan2.sqrt()),
            conv2_b: scaled(&mut rng, CHANNELS, 0.05),
            // generous scale so the conditioning visibly steers the
            // prediction and training has signal to follow
            cond_w: scaled(&mut rng, HIDDEN * embed_dim, 1.0),
            time_w: scaled(&mut rng, HIDDEN * TIME_FEATURES, 0.3),
        }
    }

    fn time_features(&self, t: usize) -> [f64; TIME_FEATURES] {
        let x = t as f64 / self.schedule.len() as f64;
        let tau = std::f64::consts::TAU;
        [x, (tau * x).sin(), (tau * x).cos(), (2.0 * tau * x).sin()]
    }

    /// Hidden pre-activation: conv1(z_t) + b1 + W_c·pooled + W_t·tfeat.
    fn hidden_pre(&self, z_t: &LatentCode, t: usize, pooled: &[f64]) -> Vec<f64> {
        let mut pre = conv3x3_forward(z_t.data(), &self.conv1_w, CHANNELS, HIDDEN, SIDE);
        let tfeat = self.time_features(t);
        for ch in 0..HIDDEN {
            let mut bias = self.conv1_b[ch];
            for (j, p) in pooled.iter().enumerate() {
                bias += self.cond_w[ch * self.embed_dim + j] * p;
            }
            for (j, f) in tfeat.iter().enumerate() {
                bias += self.time_w[ch * TIME_FEATURES + j] * f;
            }
            for v in &mut pre[ch * SIDE * SIDE..(ch + 1) * SIDE * SIDE] {
                *v += bias;
            }
        }
        pre
    }

    fn forward(&self, z_t: &LatentCode, t: usize, pooled: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pre = self.hidden_pre(z_t, t, pooled);
        let h: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
        let mut out = conv3x3_forward(&h, &self.conv2_w, HIDDEN, CHANNELS, SIDE);
        for ch in 0..CHANNELS {
            for v in &mut out[ch * SIDE * SIDE..(ch + 1) * SIDE * SIDE] {
                *v += self.conv2_b[ch];
            }
        }
        (out, h)
    }

    fn pooled_condition(&self, cond: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_cond(cond)?;
        let mut pooled = vec![0.0; self.embed_dim];
        if cond.is_empty() {
            return Ok(pooled);
        }
        for row in cond {
            for (acc, v) in pooled.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let inv = 1.0 / cond.len() as f64;
        for v in &mut pooled {
            *v *= inv;
        }
        Ok(pooled)
    }
}

impl DiffusionBackend for TinyBackend {
    fn id(&self) -> String {
        format!("tiny-{}-d{}", self.seed, self.embed_dim)
    }

    fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    fn image_geometry(&self) -> Geometry {
        Geometry { channels: CHANNELS, height: SIDE, width: SIDE }
    }

    fn latent_geometry(&self) -> Geometry {
        Geometry { channels: CHANNELS, height: SIDE, width: SIDE }
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn encode_image(&self, image: &ImageTensor) -> Result<LatentCode> {
        let g = image.geometry();
        if g != self.image_geometry() {
            return Err(Error::InvalidImage {
                reason: format!(
                    "tiny backend expects {:?}, got {:?}",
                    self.image_geometry(),
                    g
                ),
            });
        }
        LatentCode::new(g.channels, g.height, g.width, image.data().to_vec())
    }

    fn decode_latent(&self, latent: &LatentCode) -> Result<ImageTensor> {
        self.check_latent(latent)?;
        let g = latent.geometry();
        ImageTensor::new(g.channels, g.height, g.width, latent.data().to_vec())
    }

    fn predict_noise(&self, z_t: &LatentCode, t: usize, cond: &[Vec<f64>]) -> Result<LatentCode> {
        self.check_latent(z_t)?;
        if t >= self.schedule.len() {
            return Err(Error::InvalidTimestep { t, max: self.schedule.len() });
        }
        let pooled = self.pooled_condition(cond)?;
        let (out, _) = self.forward(z_t, t, &pooled);
        Ok(LatentCode::like(z_t, out))
    }

    fn loss_with_cond_grad(
        &self,
        noised: &NoisedLatent,
        cond: &[Vec<f64>],
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_latent(&noised.z_t)?;
        if noised.t >= self.schedule.len() {
            return Err(Error::InvalidTimestep { t: noised.t, max: self.schedule.len() });
        }
        let pooled = self.pooled_condition(cond)?;
        let (out, h) = self.forward(&noised.z_t, noised.t, &pooled);
        let n = out.len() as f64;

        let mut loss = 0.0;
        let mut d_out = vec![0.0; out.len()];
        for (i, (pred, target)) in out.iter().zip(noised.noise.data()).enumerate() {
            let diff = pred - target;
            loss += diff * diff;
            d_out[i] = 2.0 * diff / n;
        }
        loss /= n;

        // back through conv2, tanh, then the per-channel condition bias
        let d_h = conv3x3_backward_input(&d_out, &self.conv2_w, HIDDEN, CHANNELS, SIDE);
        let mut d_bias = [0.0; HIDDEN];
        for ch in 0..HIDDEN {
            let mut acc = 0.0;
            for pix in 0..SIDE * SIDE {
                let idx = ch * SIDE * SIDE + pix;
                acc += d_h[idx] * (1.0 - h[idx] * h[idx]);
            }
            d_bias[ch] = acc;
        }
        let mut d_pooled = vec![0.0; self.embed_dim];
        for ch in 0..HIDDEN {
            for j in 0..self.embed_dim {
                d_pooled[j] += self.cond_w[ch * self.embed_dim + j] * d_bias[ch];
            }
        }
        let rows = cond.len().max(1) as f64;
        let row_grad: Vec<f64> = d_pooled.iter().map(|v| v / rows).collect();
        Ok((loss, vec![row_grad; cond.len()]))
    }

    fn params_fingerprint(&self) -> String {
        let mut fp = Fingerprint::new();
        fp.add_str("tiny");
        fp.add_f64s(&self.conv1_w);
        fp.add_f64s(&self.conv1_b);
        fp.add_f64s(&self.conv2_w);
        fp.add_f64s(&self.conv2_b);
        fp.add_f64s(&self.cond_w);
        fp.add_f64s(&self.time_w);
        fp.finish()
    }
}

fn scaled(rng: &mut DetRng, len: usize, scale: f64) -> Vec<f64> {
    rng.normal_vec(len).into_iter().map(|v| v * scale).collect()
}

/// Same-padding 3x3 convolution over channel-major data.
fn conv3x3_forward(
    input: &[f64],
    weights: &[f64],
    in_ch: usize,
    out_ch: usize,
    side: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; out_ch * side * side];
    for oc in 0..out_ch {
        for ic in 0..in_ch {
            let wbase = (oc * in_ch + ic) * KSIZE * KSIZE;
            let ibase = ic * side * side;
            for y in 0..side {
                for x in 0..side {
                    let mut acc = 0.0;
                    for ky in 0..KSIZE {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= side as isize {
                            continue;
                        }
                        for kx in 0..KSIZE {
                            let sx = x as isize + kx as isize - 1;
                            if sx < 0 || sx >= side as isize {
                                continue;
                            }
                            acc += weights[wbase + ky * KSIZE + kx]
                                * input[ibase + sy as usize * side + sx as usize];
                        }
                    }
                    out[oc * side * side + y * side + x] += acc;
                }
            }
        }
    }
    out
}

/// Gradient of a same-padding 3x3 convolution with respect to its input.
fn conv3x3_backward_input(
    d_out: &[f64],
    weights: &[f64],
    in_ch: usize,
    out_ch: usize,
    side: usize,
) -> Vec<f64> {
    let mut d_in = vec![0.0; in_ch * side * side];
    for oc in 0..out_ch {
        for ic in 0..in_ch {
            let wbase = (oc * in_ch + ic) * KSIZE * KSIZE;
            for y in 0..side {
                for x in 0..side {
                    let g = d_out[oc * side * side + y * side + x];
                    if g == 0.0 {
                        continue;
                    }
                    for ky in 0..KSIZE {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= side as isize {
                            continue;
                        }
                        for kx in 0..KSIZE {
                            let sx = x as isize + kx as isize - 1;
                            if sx < 0 || sx >= side as isize {
                                continue;
                            }
                            d_in[ic * side * side + sy as usize * side + sx as usize] +=
                                weights[wbase + ky * KSIZE + kx] * g;
                        }
                    }
                }
            }
        }
    }
    d_in
}
