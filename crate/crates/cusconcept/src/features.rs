//! Feature extractors behind the image–text similarity surfaces.
//!
//! The pretrained pipelines use a vision–language model for these; the
//! deterministic implementations here keep every metric and vocabulary
//! filter runnable offline. All of them are pure functions of their inputs.

use crate::diffusion::ImageTensor;
use crate::embedding::{EmbeddingSpace, SlotValue};
use crate::error::Result;
use crate::math::DetRng;

/// Image -> feature vector.
pub trait ImageFeatureExtractor {
    fn id(&self) -> String;
    fn features(&self, image: &ImageTensor) -> Vec<f64>;
}

/// Fixed-grid average pooling: each channel reduced to a POOL x POOL grid.
/// Cheap, deterministic, and sensitive to coarse image content.
pub struct PooledImageFeatures {
    pub pool: usize,
}

impl Default for PooledImageFeatures {
    fn default() -> Self {
        PooledImageFeatures { pool: 4 }
    }
}

impl ImageFeatureExtractor for PooledImageFeatures {
    fn id(&self) -> String {
        format!("pooled-{}", self.pool)
    }

    fn features(&self, image: &ImageTensor) -> Vec<f64> {
        let g = image.geometry();
        let p = self.pool.min(g.height).min(g.width).max(1);
        let mut out = vec![0.0; g.channels * p * p];
        let mut counts = vec![0usize; g.channels * p * p];
        for c in 0..g.channels {
            for y in 0..g.height {
                let py = y * p / g.height;
                for x in 0..g.width {
                    let px = x * p / g.width;
                    let cell = c * p * p + py * p + px;
                    out[cell] += image.data()[c * g.height * g.width + y * g.width + x];
                    counts[cell] += 1;
                }
            }
        }
        for (v, n) in out.iter_mut().zip(counts) {
            if n > 0 {
                *v /= n as f64;
            }
        }
        out
    }
}

/// Resolved prompt rows -> prompt feature vector.
pub trait TextFeatureModel {
    fn id(&self) -> String;
    fn features(&self, rows: &[Vec<f64>]) -> Vec<f64>;
}

/// Mean pooling over the token rows. A placeholder bound to a word's
/// embedding therefore yields exactly the same prompt feature as the word.
pub struct MeanPoolText;

impl TextFeatureModel for MeanPoolText {
    fn id(&self) -> String {
        "mean-pool".into()
    }

    fn features(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut out = vec![0.0; dim];
        for row in rows {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        if !rows.is_empty() {
            let inv = 1.0 / rows.len() as f64;
            for o in &mut out {
                *o *= inv;
            }
        }
        out
    }
}

/// Image–word similarity used by the vocabulary filters.
pub trait WordImageScorer {
    fn id(&self) -> String;
    /// One score per word; callers rank by it.
    fn score_words(&self, image: &ImageTensor, words: &[String]) -> Result<Vec<f64>>;
}

/// Scores a word by embedding it in a prompt template, mean-pooling the
/// token rows, projecting into the image-feature space through a seeded
/// random map, and taking cosine similarity with the pooled image features.
pub struct ProjectionScorer<'a> {
    pub space: &'a EmbeddingSpace,
    pub image_features: PooledImageFeatures,
    pub template: String,
    pub seed: u64,
}

impl<'a> ProjectionScorer<'a> {
    pub fn new(space: &'a EmbeddingSpace, seed: u64) -> Self {
        ProjectionScorer {
            space,
            image_features: PooledImageFeatures::default(),
            template: "a photo of a {}".into(),
            seed,
        }
    }

    fn projection_row(&self, i: usize, dim: usize) -> Vec<f64> {
        let mut rng = DetRng::derive(self.seed, &format!("scorer-proj-{i}"));
        let scale = 1.0 / (dim as f64).sqrt();
        rng.normal_vec(dim).into_iter().map(|v| v * scale).collect()
    }
}

impl WordImageScorer for ProjectionScorer<'_> {
    fn id(&self) -> String {
        format!("projection-{}", self.seed)
    }

    fn score_words(&self, image: &ImageTensor, words: &[String]) -> Result<Vec<f64>> {
        let img_feat = self.image_features.features(image);
        let text_model = MeanPoolText;
        let dim = self.space.dim();
        let proj: Vec<Vec<f64>> = (0..img_feat.len())
            .map(|i| self.projection_row(i, dim))
            .collect();
        let mut scores = Vec::with_capacity(words.len());
        for word in words {
            let ids = self
                .space
                .encode_filled(&self.template, &SlotValue::Word(word.clone()))?;
            let rows = self.space.resolve(&ids)?;
            let t = text_model.features(&rows);
            let projected: Vec<f64> = proj.iter().map(|p| crate::math::dot(p, &t)).collect();
            scores.push(crate::math::cosine(&projected, &img_feat));
        }
        Ok(scores)
    }
}
