//! Persisted concept bundles.
//!
//! A bundle is a directory:
//!   manifest.json       format version, token list, dims, stage, seeds,
//!                       config hash, payload checksum
//!   embeddings.bin      row-major 32-bit little-endian floats, rows in
//!                       manifest token order
//!   weight_tables.json  learned per-word weights (when stage 1 ran here)
//!   loss_history.json   per-step losses for both stages
//!
//! Round-trips are bit-exact: rows are stored as f32 in memory and on disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sha256_hex;
use crate::stage1::WeightTable;
use crate::stage2::{ConceptToken, TokenRole};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenMeta {
    pub surface: String,
    pub role: TokenRole,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BundleSeeds {
    pub stage1: u64,
    pub stage2: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    /// Highest completed training stage: 1 (decomposition only) or 2.
    pub stage: u8,
    pub embed_dim: usize,
    pub axes: Vec<String>,
    pub tokens: Vec<TokenMeta>,
    pub seeds: BundleSeeds,
    pub config_hash: String,
    pub encoder_id: String,
    pub backend_id: String,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub stage1: Vec<f64>,
    pub stage2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConceptBundle {
    pub manifest: BundleManifest,
    /// One f32 row per manifest token.
    pub embeddings: Vec<Vec<f32>>,
    pub weight_tables: Option<Vec<WeightTable>>,
    pub loss_history: LossHistory,
}

pub struct BundleInputs<'a> {
    pub tokens: &'a [ConceptToken],
    pub stage: u8,
    pub seeds: BundleSeeds,
    pub config_hash: String,
    pub encoder_id: String,
    pub backend_id: String,
    pub weight_tables: Option<Vec<WeightTable>>,
    pub loss_history: LossHistory,
}

impl ConceptBundle {
    /// Narrow training-state vectors to the persisted f32 representation.
    pub fn build(inputs: BundleInputs) -> ConceptBundle {
        let embeddings: Vec<Vec<f32>> = inputs
            .tokens
            .iter()
            .map(|t| t.values.iter().map(|v| *v as f32).collect())
            .collect();
        let axes: Vec<String> = inputs
            .tokens
            .iter()
            .filter_map(|t| match &t.role {
                TokenRole::Attribute { axis } => Some(axis.clone()),
                TokenRole::Object => None,
            })
            .collect();
        let embed_dim = embeddings.first().map(|r| r.len()).unwrap_or(0);
        let manifest = BundleManifest {
            format_version: BUNDLE_FORMAT_VERSION,
            stage: inputs.stage,
            embed_dim,
            axes,
            tokens: inputs
                .tokens
                .iter()
                .map(|t| TokenMeta { surface: t.surface.clone(), role: t.role.clone() })
                .collect(),
            seeds: inputs.seeds,
            config_hash: inputs.config_hash,
            encoder_id: inputs.encoder_id,
            backend_id: inputs.backend_id,
            payload_sha256: sha256_hex(&payload_bytes(&embeddings)),
        };
        ConceptBundle {
            manifest,
            embeddings,
            weight_tables: inputs.weight_tables,
            loss_history: inputs.loss_history,
        }
    }

    /// Tokens widened back to the f64 training representation.
    pub fn tokens(&self) -> Vec<ConceptToken> {
        self.manifest
            .tokens
            .iter()
            .zip(&self.embeddings)
            .map(|(meta, row)| ConceptToken {
                surface: meta.surface.clone(),
                role: meta.role.clone(),
                values: row.iter().map(|v| *v as f64).collect(),
            })
            .collect()
    }

    pub fn object_token(&self) -> Option<ConceptToken> {
        self.tokens().into_iter().find(|t| t.role == TokenRole::Object)
    }

    pub fn attribute_tokens(&self) -> Vec<ConceptToken> {
        self.tokens()
            .into_iter()
            .filter(|t| matches!(t.role, TokenRole::Attribute { .. }))
            .collect()
    }
}

fn payload_bytes(embeddings: &[Vec<f32>]) -> Vec<u8> {
    let mut bytes = Vec::new();
    for row in embeddings {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_bundle(dir: &Path, bundle: &ConceptBundle) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let payload = payload_bytes(&bundle.embeddings);
    debug_assert_eq!(sha256_hex(&payload), bundle.manifest.payload_sha256);
    write_atomic(&dir.join("embeddings.bin"), &payload)?;
    write_atomic(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&bundle.manifest)?.as_bytes(),
    )?;
    if let Some(tables) = &bundle.weight_tables {
        write_atomic(
            &dir.join("weight_tables.json"),
            serde_json::to_string_pretty(tables)?.as_bytes(),
        )?;
    }
    write_atomic(
        &dir.join("loss_history.json"),
        serde_json::to_string_pretty(&bundle.loss_history)?.as_bytes(),
    )?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<ConceptBundle> {
    let corrupt = |reason: String| Error::CorruptBundle {
        path: dir.display().to_string(),
        reason,
    };
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(corrupt("manifest.json missing".into()));
    }
    let manifest: BundleManifest =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .map_err(|e| corrupt(format!("manifest.json unreadable: {e}")))?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::UnsupportedBundleVersion {
            found: manifest.format_version,
            supported: BUNDLE_FORMAT_VERSION,
        });
    }
    let payload = std::fs::read(dir.join("embeddings.bin"))
        .map_err(|e| corrupt(format!("embeddings.bin unreadable: {e}")))?;
    if sha256_hex(&payload) != manifest.payload_sha256 {
        return Err(corrupt("payload checksum mismatch".into()));
    }
    let expected = manifest.tokens.len() * manifest.embed_dim * 4;
    if payload.len() != expected {
        return Err(corrupt(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut embeddings = Vec::with_capacity(manifest.tokens.len());
    for row_idx in 0..manifest.tokens.len() {
        let mut row = Vec::with_capacity(manifest.embed_dim);
        for col in 0..manifest.embed_dim {
            let off = (row_idx * manifest.embed_dim + col) * 4;
            row.push(f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()));
        }
        embeddings.push(row);
    }
    let tables_path = dir.join("weight_tables.json");
    let weight_tables = if tables_path.is_file() {
        Some(
            serde_json::from_str(&std::fs::read_to_string(&tables_path)?)
                .map_err(|e| corrupt(format!("weight_tables.json unreadable: {e}")))?,
        )
    } else {
        None
    };
    let history_path = dir.join("loss_history.json");
    let loss_history = if history_path.is_file() {
        serde_json::from_str(&std::fs::read_to_string(&history_path)?)
            .map_err(|e| corrupt(format!("loss_history.json unreadable: {e}")))?
    } else {
        LossHistory::default()
    };
    Ok(ConceptBundle { manifest, embeddings, weight_tables, loss_history })
}
