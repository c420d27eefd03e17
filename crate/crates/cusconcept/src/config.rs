//! Run configuration: one TOML file, dotted-path CLI overrides, and a
//! content hash embedded in every artifact. Precedence: flags > file >
//! defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sha256_hex;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Which frozen text encoder backs the embedding space. The default
    /// synthetic table runs everywhere; point `encoder.table_path` at an
    /// exported checkpoint table (and set a matching id) for full-scale use.
    pub text_encoder_id: String,
    pub encoder: EncoderConfig,
    pub backend: BackendConfig,
    pub stage1: Stage1Section,
    pub stage2: Stage2Section,
    pub vocab: VocabSection,
    pub llm: LlmSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
    /// Emit a progress line every this many training steps (0 = silent).
    pub log_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Token-embedding width of the synthetic table.
    pub dim: usize,
    pub seed: u64,
    /// Exported embedding table (u32le rows, u32le dim, f32le data).
    pub table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// "tiny" or "pretrained".
    pub kind: String,
    /// For "pretrained": directory with the exported checkpoint.
    pub model_id: String,
    /// Sampler steps for generation.
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Section {
    pub steps: usize,
    pub lr_attr: f64,
    pub lr_obj: f64,
    pub k_attr: usize,
    pub k_obj: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Section {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    /// Attribute words requested per axis (N).
    pub n_attr: usize,
    /// Object vocabulary size (M).
    pub m_obj: usize,
    /// Open-set attribute vocabulary size for the no-axes ablation.
    pub m_attr_open: usize,
    /// Seed for the deterministic word–image scorer.
    pub scorer_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    /// "fixture" (offline word lists) or "http" (chat-completions API).
    pub provider: String,
    pub model: String,
    pub base_url: String,
    /// Extra fixture directory overriding the bundled lists.
    pub fixtures_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Generated images per prompt mode per record.
    pub images_per_mode: usize,
    pub seed: u64,
    pub templates_attr_path: Option<PathBuf>,
    pub templates_obj_path: Option<PathBuf>,
    pub candidates_attr_path: Option<PathBuf>,
    pub candidates_obj_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Vocabulary cache directory; `CUSCONCEPT_CACHE_DIR` wins over this.
    pub cache_dir: Option<PathBuf>,
    /// Machine-readable JSON-lines log destination.
    pub log_jsonl: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            text_encoder_id: "clip-synthetic".into(),
            encoder: EncoderConfig::default(),
            backend: BackendConfig::default(),
            stage1: Stage1Section::default(),
            stage2: Stage2Section::default(),
            vocab: VocabSection::default(),
            llm: LlmSection::default(),
            eval: EvalSection::default(),
            paths: PathsSection::default(),
            log_every: 25,
        }
    }
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { dim: 64, seed: 0, table_path: None }
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig { kind: "tiny".into(), model_id: String::new(), steps: 20, seed: 0 }
    }
}

impl Default for Stage1Section {
    fn default() -> Self {
        let d = crate::stage1::Stage1Config::default();
        Stage1Section {
            steps: d.steps,
            lr_attr: d.lr_attr,
            lr_obj: d.lr_obj,
            k_attr: d.k_attr,
            k_obj: d.k_obj,
            seed: d.seed,
        }
    }
}

impl Default for Stage2Section {
    fn default() -> Self {
        let d = crate::stage2::Stage2Config::default();
        Stage2Section { steps: d.steps, lr: d.lr, seed: d.seed }
    }
}

impl Default for VocabSection {
    fn default() -> Self {
        VocabSection { n_attr: 22, m_obj: 500, m_attr_open: 500, scorer_seed: 0 }
    }
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            provider: "fixture".into(),
            model: "gpt-4".into(),
            base_url: "https://api.openai.com/v1".into(),
            fixtures_dir: None,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            images_per_mode: 4,
            seed: 0,
            templates_attr_path: None,
            templates_obj_path: None,
            candidates_attr_path: None,
            candidates_obj_path: None,
            labels_path: None,
        }
    }
}

impl RunConfig {
    /// Load a TOML file (defaults when `path` is None) and apply dotted-path
    /// overrides like `stage1.steps=10`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut table: toml::Table = match path {
            Some(p) => std::fs::read_to_string(p)?
                .parse()
                .map_err(|e| Error::Config { reason: format!("{}: {e}", p.display()) })?,
            None => toml::Table::new(),
        };
        for entry in overrides {
            apply_override(&mut table, entry)?;
        }
        let text = toml::to_string(&table).map_err(|e| Error::Config { reason: e.to_string() })?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config { reason: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.backend.kind != "tiny" && self.backend.kind != "pretrained" {
            return Err(Error::Config {
                reason: format!("backend.kind must be tiny or pretrained, got {:?}", self.backend.kind),
            });
        }
        if self.llm.provider != "fixture" && self.llm.provider != "http" {
            return Err(Error::Config {
                reason: format!("llm.provider must be fixture or http, got {:?}", self.llm.provider),
            });
        }
        if self.vocab.n_attr == 0 || self.vocab.m_obj == 0 {
            return Err(Error::Config { reason: "vocabulary sizes must be positive".into() });
        }
        Ok(())
    }

    /// Content hash over the fully resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())[..16].to_string()
    }

    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os("CUSCONCEPT_CACHE_DIR") {
            return PathBuf::from(dir);
        }
        self.paths
            .cache_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(".cusconcept-cache"))
    }

    pub fn stage1_config(&self) -> crate::stage1::Stage1Config {
        crate::stage1::Stage1Config {
            steps: self.stage1.steps,
            lr_attr: self.stage1.lr_attr,
            lr_obj: self.stage1.lr_obj,
            k_attr: self.stage1.k_attr,
            k_obj: self.stage1.k_obj,
            seed: self.stage1.seed,
        }
    }

    pub fn stage2_config(&self) -> crate::stage2::Stage2Config {
        crate::stage2::Stage2Config {
            steps: self.stage2.steps,
            lr: self.stage2.lr,
            seed: self.stage2.seed,
        }
    }
}

/// Set `a.b.c=value` inside a TOML table, parsing the value as TOML when
/// possible and falling back to a bare string.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<()> {
    let (path, raw_value) = entry.split_once('=').ok_or_else(|| Error::Config {
        reason: format!("override {entry:?} must look like key.path=value"),
    })?;
    let value: toml::Value = match format!("v = {raw_value}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw_value.trim().to_string()),
    };
    let parts: Vec<&str> = path.trim().split('.').collect();
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config {
                reason: format!("override path {path:?} crosses a non-table"),
            })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
