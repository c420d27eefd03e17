//! Vocabulary-guided concept decomposition.
//!
//! A projection MLP per axis maps each vocabulary word's token embedding to
//! a scalar weight; the top-k weighted word embeddings are summed into a
//! concept centroid; the MLPs are the only trainable parameters and are
//! optimized under the frozen backend's denoising loss. The learned weights
//! double as explicit vocabulary predictions.

use serde::{Deserialize, Serialize};

use crate::conditioning::PromptPlan;
use crate::diffusion::{sample_noise, DiffusionBackend, ImageTensor};
use crate::embedding::EmbeddingSpace;
use crate::error::{DivergedState, Error, Result};
use crate::math::{axpy, dot, norm, DetRng};
use crate::optim::AdamW;

mod mlp;

pub use mlp::ProjectionMlp;

/// Per-word scalar weights for one axis, with the selected top-k set.
///
/// `selected` holds indices into `words`, ordered by rank (descending
/// weight, ties by word); it always has exactly `min(k, |words|)` entries
/// and every selected weight is >= every unselected weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightTable {
    pub axis: String,
    pub words: Vec<String>,
    pub weights: Vec<f64>,
    pub selected: Vec<usize>,
    pub k: usize,
}

impl WeightTable {
    pub fn new(axis: &str, words: Vec<String>, weights: Vec<f64>, k: usize) -> Self {
        assert_eq!(words.len(), weights.len());
        let selected = select_top_k(&words, &weights, k);
        WeightTable { axis: axis.to_string(), words, weights, selected, k }
    }

    /// Word indices ranked by descending weight, ties lexicographic.
    pub fn ranking(&self) -> Vec<usize> {
        rank_indices(&self.words, &self.weights)
    }
}

/// The weighted sum of the selected top-k word embeddings for one axis.
#[derive(Debug, Clone)]
pub struct ConceptCentroid {
    pub axis: String,
    pub values: Vec<f64>,
}

/// A vocabulary with its word embeddings gathered once up front.
#[derive(Debug, Clone)]
pub struct VocabEmbeddings {
    pub axis: String,
    pub words: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl VocabEmbeddings {
    pub fn gather(space: &EmbeddingSpace, axis: &str, words: &[String]) -> Result<Self> {
        let mut rows = Vec::with_capacity(words.len());
        for word in words {
            rows.push(space.embed_word(word)?.into_values());
        }
        Ok(VocabEmbeddings { axis: axis.to_string(), words: words.to_vec(), rows })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// One scalar weight per word; a pure function of each word's embedding.
pub fn project_weights(mlp: &ProjectionMlp, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter().map(|row| mlp.forward(row)).collect()
}

fn rank_indices(words: &[String], weights: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..words.len()).collect();
    idx.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| words[a].cmp(&words[b]))
    });
    idx
}

/// Indices of the min(k, |vocab|) largest weights, ties broken by word.
pub fn select_top_k(words: &[String], weights: &[f64], k: usize) -> Vec<usize> {
    let mut ranked = rank_indices(words, weights);
    ranked.truncate(k.min(words.len()));
    ranked
}

/// u = Σ_{j in top-k} w_j · μ(word_j).
pub fn aggregate_concept(
    vocab: &VocabEmbeddings,
    mlp: &ProjectionMlp,
    k: usize,
) -> Result<(WeightTable, ConceptCentroid)> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let weights = project_weights(mlp, &vocab.rows)?;
    let table = WeightTable::new(&vocab.axis, vocab.words.clone(), weights, k);
    let centroid = centroid_from(&table, vocab);
    Ok((table, centroid))
}

/// Weighted sum over the table's selected words.
pub fn centroid_of(table: &WeightTable, vocab: &VocabEmbeddings) -> ConceptCentroid {
    centroid_from(table, vocab)
}

fn centroid_from(table: &WeightTable, vocab: &VocabEmbeddings) -> ConceptCentroid {
    let dim = vocab.rows.first().map(|r| r.len()).unwrap_or(0);
    let mut values = vec![0.0; dim];
    for &j in &table.selected {
        axpy(&mut values, table.weights[j], &vocab.rows[j]);
    }
    ConceptCentroid { axis: table.axis.clone(), values }
}

/// Weighted sum over an explicit selection, ignoring the current ranking.
/// Gradient checks use this to hold the selected set fixed.
pub fn aggregate_fixed_selection(
    vocab: &VocabEmbeddings,
    mlp: &ProjectionMlp,
    selected: &[usize],
) -> Result<Vec<f64>> {
    let dim = vocab.rows.first().map(|r| r.len()).unwrap_or(0);
    let mut values = vec![0.0; dim];
    for &j in selected {
        let w = mlp.forward(&vocab.rows[j])?;
        axpy(&mut values, w, &vocab.rows[j]);
    }
    Ok(values)
}

/// Ranked word list read off the learned weights.
pub fn predict_vocabulary(table: &WeightTable, top_n: usize) -> Vec<(String, f64)> {
    table
        .ranking()
        .into_iter()
        .take(top_n)
        .map(|i| (table.words[i].clone(), table.weights[i]))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Stage1Config {
    pub steps: usize,
    pub lr_attr: f64,
    pub lr_obj: f64,
    pub k_attr: usize,
    pub k_obj: usize,
    pub seed: u64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            steps: 400,
            lr_attr: 0.01,
            lr_obj: 0.001,
            k_attr: 10,
            k_obj: 50,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct Stage1Output {
    /// One table per attribute axis, in the user-specified order.
    pub tables: Vec<WeightTable>,
    pub object_table: WeightTable,
    pub centroids: Vec<ConceptCentroid>,
    pub object_centroid: ConceptCentroid,
    pub mlps: Vec<ProjectionMlp>,
    pub object_mlp: ProjectionMlp,
    pub loss_history: Vec<f64>,
}

/// Per-step callback payload for loggers.
pub struct StepEvent<'a> {
    pub step: usize,
    pub loss: f64,
    pub centroid_norms: &'a [f64],
}

/// Optimize the projection MLPs under the denoising loss.
///
/// Only MLP parameters receive updates; the backend, the embedding table,
/// and the vocabulary rows are read-only. The top-k selection is recomputed
/// from the current weights at every step and treated as non-differentiable;
/// gradients flow through the selected weights only.
#[allow(clippy::too_many_arguments)]
pub fn train_stage1(
    image: &ImageTensor,
    axes: &[VocabEmbeddings],
    object: &VocabEmbeddings,
    backend: &dyn DiffusionBackend,
    space: &EmbeddingSpace,
    template: &str,
    cfg: &Stage1Config,
    mut observer: Option<&mut dyn FnMut(StepEvent)>,
) -> Result<Stage1Output> {
    if object.is_empty() || axes.iter().any(|a| a.is_empty()) {
        return Err(Error::EmptyVocabulary);
    }
    let dim = space.dim();
    let mut mlps: Vec<ProjectionMlp> = axes
        .iter()
        .map(|a| {
            ProjectionMlp::projection_default(
                &a.axis,
                dim,
                DetRng::derive(cfg.seed, &format!("stage1-mlp-{}", a.axis)).next_u64(),
            )
        })
        .collect();
    let mut object_mlp = ProjectionMlp::projection_default(
        "object",
        dim,
        DetRng::derive(cfg.seed, "stage1-mlp-object").next_u64(),
    );
    let mut optimizers: Vec<AdamW> = mlps
        .iter()
        .map(|m| AdamW::new(m.params().len(), cfg.lr_attr))
        .collect();
    let mut object_optimizer = AdamW::new(object_mlp.params().len(), cfg.lr_obj);

    let plan = PromptPlan::compile(space, template, axes.len())?;
    let z = backend.encode_image(image)?;
    let mut rng_t = DetRng::derive(cfg.seed, "stage1-t");
    let mut rng_eps = DetRng::derive(cfg.seed, "stage1-eps");
    let mut loss_history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        // aggregate with the current parameters; selection is re-derived here
        let mut slots: Vec<Vec<f64>> = Vec::with_capacity(axes.len() + 1);
        let mut tables: Vec<WeightTable> = Vec::with_capacity(axes.len());
        for (axis, mlp) in axes.iter().zip(&mlps) {
            let (table, centroid) = aggregate_concept(axis, mlp, cfg.k_attr)?;
            slots.push(centroid.values);
            tables.push(table);
        }
        let (object_table, object_centroid) = aggregate_concept(object, &object_mlp, cfg.k_obj)?;
        slots.push(object_centroid.values);

        let t = rng_t.below(backend.schedule().len());
        let noise = sample_noise(backend.latent_geometry(), &mut rng_eps);
        let noised = backend.add_noise(&z, t, &noise)?;
        let cond = plan.rows(&slots)?;
        let (loss, row_grads) = backend.loss_with_cond_grad(&noised, &cond)?;

        if !loss.is_finite() {
            let last_good = finish_stage1(axes, object, mlps, object_mlp, cfg, loss_history)?;
            return Err(Error::TrainingDiverged {
                step,
                last_good: DivergedState::Decomposition(Box::new(last_good)),
            });
        }

        let slot_grads = plan.slot_grads(&row_grads)?;
        for i in 0..axes.len() {
            mlp_step(&axes[i], &mut mlps[i], &mut optimizers[i], &tables[i], &slot_grads[i])?;
        }
        mlp_step(
            object,
            &mut object_mlp,
            &mut object_optimizer,
            &object_table,
            &slot_grads[axes.len()],
        )?;

        loss_history.push(loss);
        if let Some(cb) = observer.as_deref_mut() {
            let norms: Vec<f64> = slots.iter().map(|s| norm(s)).collect();
            cb(StepEvent { step, loss, centroid_norms: &norms });
        }
    }

    finish_stage1(axes, object, mlps, object_mlp, cfg, loss_history)
}

/// One optimizer step for one MLP: chain dL/du through the selected weights.
fn mlp_step(
    vocab: &VocabEmbeddings,
    mlp: &mut ProjectionMlp,
    optimizer: &mut AdamW,
    table: &WeightTable,
    du: &[f64],
) -> Result<()> {
    let mut grads = vec![0.0; mlp.params().len()];
    for &j in &table.selected {
        // dL/dw_j = <dL/du, μ(word_j)>
        let upstream = dot(du, &vocab.rows[j]);
        mlp.accumulate_grad(&vocab.rows[j], upstream, &mut grads)?;
    }
    optimizer.update(mlp.params_mut(), &grads);
    Ok(())
}

fn finish_stage1(
    axes: &[VocabEmbeddings],
    object: &VocabEmbeddings,
    mlps: Vec<ProjectionMlp>,
    object_mlp: ProjectionMlp,
    cfg: &Stage1Config,
    loss_history: Vec<f64>,
) -> Result<Stage1Output> {
    let mut tables = Vec::with_capacity(axes.len());
    let mut centroids = Vec::with_capacity(axes.len());
    for (axis, mlp) in axes.iter().zip(&mlps) {
        let (table, centroid) = aggregate_concept(axis, mlp, cfg.k_attr)?;
        tables.push(table);
        centroids.push(centroid);
    }
    let (object_table, object_centroid) = aggregate_concept(object, &object_mlp, cfg.k_obj)?;
    Ok(Stage1Output {
        tables,
        object_table,
        centroids,
        object_centroid,
        mlps,
        object_mlp,
        loss_history,
    })
}
