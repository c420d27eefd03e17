//! Joint concept refinement: concept tokens start from the stage-1 centroids
//! and all of them are optimized together under the frozen backend's
//! denoising loss. Also hosts the two textual-inversion baseline
//! initializations used by the benchmark.

use serde::{Deserialize, Serialize};

use crate::conditioning::PromptPlan;
use crate::diffusion::{sample_noise, DiffusionBackend, ImageTensor};
use crate::embedding::EmbeddingSpace;
use crate::error::{DivergedState, Error, Result};
use crate::math::{norm, DetRng};
use crate::optim::AdamW;
use crate::stage1::ConceptCentroid;

pub mod bundle;

pub use bundle::{load_bundle, save_bundle, BundleManifest, ConceptBundle, TokenMeta};

/// A placeholder surface bound to a learnable concept vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptToken {
    pub surface: String,
    pub role: TokenRole,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenRole {
    Attribute { axis: String },
    Object,
}

impl TokenRole {
    pub fn axis(&self) -> &str {
        match self {
            TokenRole::Attribute { axis } => axis,
            TokenRole::Object => "object",
        }
    }
}

/// Surface string for an axis placeholder: lowercase, spaces collapsed.
pub fn attribute_surface(axis: &str) -> String {
    let slug: String = axis
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    format!("<s-{slug}>")
}

pub const OBJECT_SURFACE: &str = "<s-obj>";

/// Ordered concept tokens (attribute tokens in user axis order, object
/// last) plus the refinement bookkeeping.
#[derive(Debug, Clone)]
pub struct RefinementState {
    pub tokens: Vec<ConceptToken>,
    pub step: usize,
    pub loss_history: Vec<f64>,
}

impl RefinementState {
    pub fn n_attrs(&self) -> usize {
        self.tokens.len().saturating_sub(1)
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }
}

/// Bind each centroid to a fresh placeholder, bit-exactly.
pub fn init_tokens(
    attr_centroids: &[ConceptCentroid],
    object_centroid: &ConceptCentroid,
) -> Result<RefinementState> {
    let dim = object_centroid.values.len();
    let mut tokens = Vec::with_capacity(attr_centroids.len() + 1);
    for c in attr_centroids {
        if c.values.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: c.values.len() });
        }
        tokens.push(ConceptToken {
            surface: attribute_surface(&c.axis),
            role: TokenRole::Attribute { axis: c.axis.clone() },
            values: c.values.clone(),
        });
    }
    tokens.push(ConceptToken {
        surface: OBJECT_SURFACE.to_string(),
        role: TokenRole::Object,
        values: object_centroid.values.clone(),
    });
    Ok(RefinementState { tokens, step: 0, loss_history: Vec::new() })
}

/// Baseline initializations for the textual-inversion comparisons.
pub enum BaselineMode {
    /// Tokens start from the ground-truth label word embeddings.
    GtLabels { attr_labels: Vec<String>, object_label: String },
    /// Tokens start from seeded random vectors at the token table's typical
    /// row norm.
    Random { n_attrs: usize, seed: u64 },
}

pub fn init_tokens_baseline(space: &EmbeddingSpace, mode: BaselineMode) -> Result<RefinementState> {
    let tokens = match mode {
        BaselineMode::GtLabels { attr_labels, object_label } => {
            if attr_labels.is_empty() || object_label.is_empty() {
                return Err(Error::MissingLabels);
            }
            let mut tokens = Vec::with_capacity(attr_labels.len() + 1);
            for (i, label) in attr_labels.iter().enumerate() {
                tokens.push(ConceptToken {
                    surface: format!("<s-a{}>", i + 1),
                    role: TokenRole::Attribute { axis: format!("a{}", i + 1) },
                    values: space.embed_word(label)?.into_values(),
                });
            }
            tokens.push(ConceptToken {
                surface: OBJECT_SURFACE.to_string(),
                role: TokenRole::Object,
                values: space.embed_word(&object_label)?.into_values(),
            });
            tokens
        }
        BaselineMode::Random { n_attrs, seed } => {
            let dim = space.dim();
            let target_norm = space.mean_row_norm();
            let make = |label: String, role: TokenRole, stream: String| {
                let mut rng = DetRng::derive(seed, &stream);
                let mut v = rng.normal_vec(dim);
                let n = norm(&v);
                if n > 0.0 {
                    for x in &mut v {
                        *x *= target_norm / n;
                    }
                }
                ConceptToken { surface: label, role, values: v }
            };
            let mut tokens: Vec<ConceptToken> = (0..n_attrs)
                .map(|i| {
                    make(
                        format!("<s-a{}>", i + 1),
                        TokenRole::Attribute { axis: format!("a{}", i + 1) },
                        format!("ti-random-attr-{i}"),
                    )
                })
                .collect();
            tokens.push(make(
                OBJECT_SURFACE.to_string(),
                TokenRole::Object,
                "ti-random-object".to_string(),
            ));
            tokens
        }
    };
    Ok(RefinementState { tokens, step: 0, loss_history: Vec::new() })
}

#[derive(Debug, Clone)]
pub struct Stage2Config {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config { steps: 300, lr: 0.001, seed: 0 }
    }
}

/// Jointly refine every concept token under the denoising loss.
///
/// Exactly the token vectors move; backend parameters and the base token
/// table are read-only throughout.
pub fn train_stage2(
    image: &ImageTensor,
    mut state: RefinementState,
    backend: &dyn DiffusionBackend,
    space: &EmbeddingSpace,
    template: &str,
    cfg: &Stage2Config,
    mut observer: Option<&mut dyn FnMut(crate::stage1::StepEvent)>,
) -> Result<RefinementState> {
    let n_attrs = state.n_attrs();
    let plan = PromptPlan::compile(space, template, n_attrs)?;
    let z = backend.encode_image(image)?;
    let mut rng_t = DetRng::derive(cfg.seed, "stage2-t");
    let mut rng_eps = DetRng::derive(cfg.seed, "stage2-eps");
    let mut optimizers: Vec<AdamW> = state
        .tokens
        .iter()
        .map(|t| AdamW::new(t.values.len(), cfg.lr))
        .collect();

    for step in 0..cfg.steps {
        let slots: Vec<Vec<f64>> = state.tokens.iter().map(|t| t.values.clone()).collect();
        let t = rng_t.below(backend.schedule().len());
        let noise = sample_noise(backend.latent_geometry(), &mut rng_eps);
        let noised = backend.add_noise(&z, t, &noise)?;
        let cond = plan.rows(&slots)?;
        let (loss, row_grads) = backend.loss_with_cond_grad(&noised, &cond)?;

        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                step,
                last_good: DivergedState::Refinement(state.tokens),
            });
        }

        let slot_grads = plan.slot_grads(&row_grads)?;
        for ((token, opt), grad) in state.tokens.iter_mut().zip(&mut optimizers).zip(&slot_grads) {
            opt.update(&mut token.values, grad);
        }

        state.step += 1;
        state.loss_history.push(loss);
        if let Some(cb) = observer.as_deref_mut() {
            let norms: Vec<f64> = state.tokens.iter().map(|t| norm(&t.values)).collect();
            cb(crate::stage1::StepEvent { step, loss, centroid_norms: &norms });
        }
    }
    Ok(state)
}
