//! Projection MLP: a small feed-forward map from a token embedding to one
//! scalar relevance weight. Flat parameter storage so the optimizer and the
//! gradient checks can treat it as a plain vector.

use crate::error::{Error, Result};
use crate::math::DetRng;

#[derive(Debug, Clone)]
pub struct ProjectionMlp {
    pub axis: String,
    /// Layer widths including input and the final scalar, e.g. [l, l, l, l/2, 1].
    dims: Vec<usize>,
    /// Per layer: weight matrix (out x in, row-major) then bias (out).
    params: Vec<f64>,
}

impl ProjectionMlp {
    /// The default projection shape: 4 affine layers l -> l -> l -> l/2 -> 1
    /// with tanh between them and a raw (unsquashed) scalar output.
    pub fn projection_default(axis: &str, embed_dim: usize, seed: u64) -> Self {
        let half = (embed_dim / 2).max(1);
        Self::new(axis, &[embed_dim, embed_dim, embed_dim, half, 1], seed)
    }

    /// Fan-in-scaled random weights, zero biases.
    pub fn new(axis: &str, dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least one affine layer");
        assert_eq!(*dims.last().unwrap(), 1, "output must be a scalar");
        let mut rng = DetRng::new(seed);
        let mut params = Vec::with_capacity(Self::param_count(dims));
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.normal() * scale);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ProjectionMlp { axis: axis.to_string(), dims: dims.to_vec(), params }
    }

    /// Explicit parameters, for hand-computed fixtures.
    pub fn with_params(axis: &str, dims: &[usize], params: Vec<f64>) -> Self {
        assert_eq!(params.len(), Self::param_count(dims));
        ProjectionMlp { axis: axis.to_string(), dims: dims.to_vec(), params }
    }

    fn param_count(dims: &[usize]) -> usize {
        (0..dims.len() - 1).map(|l| dims[l] * dims[l + 1] + dims[l + 1]).sum()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // yields (offset, fan_in, fan_out) per layer
        let mut offset = 0;
        (0..self.dims.len() - 1).map(move |l| {
            let out = (offset, self.dims[l], self.dims[l + 1]);
            offset += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
            out
        })
    }

    /// Scalar weight for one embedding; tanh between layers, raw output.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Forward pass keeping per-layer activations for backprop.
    fn forward_cached(&self, x: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        if x.len() != self.dims[0] {
            return Err(Error::DimensionMismatch { expected: self.dims[0], got: x.len() });
        }
        let n_layers = self.dims.len() - 1;
        // activations[l] is the INPUT to layer l
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut current = x.to_vec();
        for (l, (offset, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            activations.push(current.clone());
            let mut next = vec![0.0; fan_out];
            for o in 0..fan_out {
                let row = offset + o * fan_in;
                let mut acc = self.params[offset + fan_in * fan_out + o];
                for i in 0..fan_in {
                    acc += self.params[row + i] * current[i];
                }
                next[o] = acc;
            }
            if l + 1 < n_layers {
                for v in &mut next {
                    *v = v.tanh();
                }
            }
            current = next;
        }
        Ok((current[0], activations))
    }

    /// Accumulate d(upstream * output)/d(params) into `grads`.
    ///
    /// `grads` must have the same length as `params`; contributions from
    /// multiple words sum, matching the weighted-sum aggregation.
    pub fn accumulate_grad(&self, x: &[f64], upstream: f64, grads: &mut [f64]) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let (_, activations) = self.forward_cached(x)?;
        let layers: Vec<(usize, usize, usize)> = self.layer_offsets().collect();
        let n_layers = layers.len();

        // delta over the outputs of the current layer, starting at the scalar
        let mut delta = vec![upstream];
        for l in (0..n_layers).rev() {
            let (offset, fan_in, fan_out) = layers[l];
            let input = &activations[l];
            debug_assert_eq!(delta.len(), fan_out);
            for o in 0..fan_out {
                let row = offset + o * fan_in;
                for i in 0..fan_in {
                    grads[row + i] += delta[o] * input[i];
                }
                grads[offset + fan_in * fan_out + o] += delta[o];
            }
            if l > 0 {
                // propagate through the layer's weights, then through the
                // tanh that produced this layer's input
                let mut prev = vec![0.0; fan_in];
                for o in 0..fan_out {
                    let row = offset + o * fan_in;
                    for i in 0..fan_in {
                        prev[i] += self.params[row + i] * delta[o];
                    }
                }
                for (i, p) in prev.iter_mut().enumerate() {
                    *p *= 1.0 - input[i] * input[i];
                }
                delta = prev;
            }
        }
        Ok(())
    }
}
