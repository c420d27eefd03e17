//! Benchmark harness: dataset ingestion, the three metrics (image fidelity,
//! embedding similarity, retrieval accuracy), and report emission.

mod templates;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::ImageTensor;
use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::features::{ImageFeatureExtractor, TextFeatureModel};
use crate::math::cosine;
use crate::stage1::{select_top_k, WeightTable};

pub use templates::{PromptTemplateSet, TEMPLATE_SET_VERSION};

/// One benchmark image with its closed-set labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub image: String,
    pub object: String,
    pub attribute: String,
    pub axis: String,
}

/// The dataset's closed label sets: attribute word -> axis, object words.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSets {
    pub attributes: BTreeMap<String, String>,
    pub objects: Vec<String>,
}

impl LabelSets {
    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../../data/benchmark/labels.json"))
            .expect("bundled labels are valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn axis_of(&self, attribute: &str) -> Option<&str> {
        self.attributes.get(attribute).map(|s| s.as_str())
    }
}

/// Retrieval candidate words (attribute and object lists).
#[derive(Debug, Clone)]
pub struct CandidateLists {
    pub attributes: Vec<String>,
    pub objects: Vec<String>,
}

impl CandidateLists {
    pub fn bundled() -> Self {
        let parse = |text: &str| {
            text.lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect()
        };
        CandidateLists {
            attributes: parse(include_str!("../../data/candidates/attributes_440.txt")),
            objects: parse(include_str!("../../data/candidates/objects_541.txt")),
        }
    }

    pub fn from_files(attributes: &Path, objects: &Path) -> Result<Self> {
        let read = |path: &Path| -> Result<Vec<String>> {
            Ok(std::fs::read_to_string(path)?
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect())
        };
        Ok(CandidateLists { attributes: read(attributes)?, objects: read(objects)? })
    }
}

/// Read and validate `manifest.jsonl` under `root`.
///
/// Labels must come from the closed sets with consistent axis membership;
/// with `check_assets` the referenced image files must exist too.
pub fn ingest_dataset(
    root: &Path,
    labels: &LabelSets,
    check_assets: bool,
) -> Result<Vec<BenchmarkRecord>> {
    let manifest = root.join("manifest.jsonl");
    if !manifest.is_file() {
        return Err(Error::MissingAsset { path: manifest.display().to_string() });
    }
    let text = std::fs::read_to_string(&manifest)?;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: BenchmarkRecord = serde_json::from_str(line).map_err(|e| Error::InvalidLabel {
            label: format!("line {}", lineno + 1),
            reason: e.to_string(),
        })?;
        match labels.axis_of(&record.attribute) {
            None => {
                return Err(Error::InvalidLabel {
                    label: record.attribute.clone(),
                    reason: "attribute not in the closed label set".into(),
                })
            }
            Some(axis) if axis != record.axis => {
                return Err(Error::InvalidLabel {
                    label: record.attribute.clone(),
                    reason: format!("axis {:?} disagrees with the label set's {axis:?}", record.axis),
                })
            }
            Some(_) => {}
        }
        if !labels.objects.contains(&record.object) {
            return Err(Error::InvalidLabel {
                label: record.object.clone(),
                reason: "object not in the closed label set".into(),
            });
        }
        if check_assets && !root.join(&record.image).is_file() {
            return Err(Error::MissingAsset {
                path: root.join(&record.image).display().to_string(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Mean cosine similarity between the reference image's features and each
/// generated image's features.
pub fn clip_i(
    extractor: &dyn ImageFeatureExtractor,
    reference: &ImageTensor,
    generated: &[ImageTensor],
) -> Result<f64> {
    if generated.is_empty() {
        return Err(Error::InvalidRequest { reason: "clip_i needs at least one image".into() });
    }
    let ref_features = extractor.features(reference);
    let mean = generated
        .iter()
        .map(|g| cosine(&ref_features, &extractor.features(g)))
        .sum::<f64>()
        / generated.len() as f64;
    Ok(mean)
}

/// Fill a single-slot template with either a plain word or a raw embedding
/// row standing in for a placeholder token.
pub enum PromptFiller<'a> {
    Word(&'a str),
    Vector(&'a [f64]),
}

pub fn filled_rows(
    space: &EmbeddingSpace,
    template: &str,
    filler: &PromptFiller,
) -> Result<Vec<Vec<f64>>> {
    let Some(pos) = template.find("{}") else {
        return Err(Error::Config { reason: format!("template {template:?} has no {{}} slot") });
    };
    let before = &template[..pos];
    let after = &template[pos + 2..];
    let mut rows = space.resolve(&space.encode_literal(before))?;
    match filler {
        PromptFiller::Word(word) => {
            rows.extend(space.resolve(&space.encode_literal(word))?);
        }
        PromptFiller::Vector(values) => {
            if values.len() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), got: values.len() });
            }
            rows.push(values.to_vec());
        }
    }
    rows.extend(space.resolve(&space.encode_literal(after))?);
    Ok(rows)
}

/// Mean prompt similarity between the label and an embedding vector over a
/// template set. One similarity evaluation per template, nothing more.
pub fn prompt_similarity(
    space: &EmbeddingSpace,
    text_model: &dyn TextFeatureModel,
    templates: &[String],
    label: &str,
    vector: &[f64],
) -> Result<f64> {
    if templates.is_empty() {
        return Err(Error::Config { reason: "empty template set".into() });
    }
    let mut total = 0.0;
    for template in templates {
        let label_rows = filled_rows(space, template, &PromptFiller::Word(label))?;
        let vector_rows = filled_rows(space, template, &PromptFiller::Vector(vector))?;
        total += cosine(&text_model.features(&label_rows), &text_model.features(&vector_rows));
    }
    Ok(total / templates.len() as f64)
}

/// The top-5 aggregated embedding from a trained weight table.
pub fn top5_embedding(space: &EmbeddingSpace, table: &WeightTable) -> Result<Vec<f64>> {
    if table.words.is_empty() {
        return Err(Error::NotTrained);
    }
    let selected = select_top_k(&table.words, &table.weights, 5);
    let mut out = vec![0.0; space.dim()];
    for idx in selected {
        let row = space.embed_word(&table.words[idx])?;
        crate::math::axpy(&mut out, table.weights[idx], row.values());
    }
    Ok(out)
}

/// Prompt similarity between the ground-truth label and the aggregated
/// top-5 embedding of a stage-1 weight table.
pub fn sim_emb(
    space: &EmbeddingSpace,
    text_model: &dyn TextFeatureModel,
    templates: &[String],
    label: &str,
    table: &WeightTable,
) -> Result<f64> {
    let aggregated = top5_embedding(space, table)?;
    prompt_similarity(space, text_model, templates, label, &aggregated)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub retrieved: String,
    pub hit: bool,
    pub score: f64,
}

/// Retrieve the candidate whose prompts sit closest to the concept
/// embedding's prompts; ties break lexicographically.
pub fn retrieval_acc(
    space: &EmbeddingSpace,
    text_model: &dyn TextFeatureModel,
    templates: &[String],
    concept: &[f64],
    candidates: &[String],
    ground_truth: &str,
) -> Result<Retrieval> {
    if candidates.is_empty() {
        return Err(Error::InvalidRequest { reason: "empty candidate list".into() });
    }
    // concept-side features are candidate-independent
    let concept_features: Vec<Vec<f64>> = templates
        .iter()
        .map(|t| {
            filled_rows(space, t, &PromptFiller::Vector(concept))
                .map(|rows| text_model.features(&rows))
        })
        .collect::<Result<_>>()?;

    let mut ordered: Vec<&String> = candidates.iter().collect();
    ordered.sort();
    ordered.dedup();

    let mut best: Option<(f64, &String)> = None;
    for candidate in ordered {
        let mut total = 0.0;
        for (template, concept_feature) in templates.iter().zip(&concept_features) {
            let rows = filled_rows(space, template, &PromptFiller::Word(candidate))?;
            total += cosine(&text_model.features(&rows), concept_feature);
        }
        let score = total / templates.len() as f64;
        // strict > keeps the lexicographically-first candidate on ties
        if best.map(|(s, _)| score > s).unwrap_or(true) {
            best = Some((score, candidate));
        }
    }
    let (score, retrieved) = best.expect("candidates non-empty");
    Ok(Retrieval { retrieved: retrieved.clone(), hit: retrieved == ground_truth, score })
}

/// Per-record metric row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordMetrics {
    pub image: String,
    pub method: String,
    pub clip_i_ao: f64,
    pub clip_i_a: f64,
    pub clip_i_o: f64,
    pub sim_emb_a: f64,
    pub sim_emb_o: f64,
    pub acc_a: f64,
    pub acc_o: f64,
    pub retrieved_a: String,
    pub retrieved_o: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub count: usize,
    pub failures: usize,
    pub clip_i_ao: f64,
    pub clip_i_a: f64,
    pub clip_i_o: f64,
    pub sim_emb_a: f64,
    pub sim_emb_o: f64,
    pub acc_a: f64,
    pub acc_o: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub template_version: String,
    pub config_hash: String,
    pub rows: Vec<RecordMetrics>,
    /// (image, error) pairs for records that failed; the run continues.
    pub incomplete: Vec<(String, String)>,
    pub aggregates: Aggregates,
}

impl MetricReport {
    pub fn assemble(
        method: &str,
        template_version: &str,
        config_hash: &str,
        mut rows: Vec<RecordMetrics>,
        incomplete: Vec<(String, String)>,
    ) -> MetricReport {
        rows.sort_by(|a, b| a.image.cmp(&b.image));
        let n = rows.len();
        let mean = |f: fn(&RecordMetrics) -> f64| -> f64 {
            if n == 0 {
                0.0
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let aggregates = Aggregates {
            count: n,
            failures: incomplete.len(),
            clip_i_ao: mean(|r| r.clip_i_ao),
            clip_i_a: mean(|r| r.clip_i_a),
            clip_i_o: mean(|r| r.clip_i_o),
            sim_emb_a: mean(|r| r.sim_emb_a),
            sim_emb_o: mean(|r| r.sim_emb_o),
            acc_a: mean(|r| r.acc_a),
            acc_o: mean(|r| r.acc_o),
        };
        MetricReport {
            method: method.to_string(),
            template_version: template_version.to_string(),
            config_hash: config_hash.to_string(),
            rows,
            incomplete,
            aggregates,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "image,method,clip_i_ao,clip_i_a,clip_i_o,sim_emb_a,sim_emb_o,acc_a,acc_o\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.0},{:.0}\n",
                r.image,
                r.method,
                r.clip_i_ao,
                r.clip_i_a,
                r.clip_i_o,
                r.sim_emb_a,
                r.sim_emb_o,
                r.acc_a,
                r.acc_o
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("report_{}.csv", self.method)), self.to_csv())?;
        std::fs::write(
            dir.join(format!("aggregates_{}.json", self.method)),
            serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
