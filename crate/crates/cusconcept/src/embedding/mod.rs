//! Frozen text-encoder adapter: word -> token-embedding lookup, the
//! whole-word token universe, placeholder registration, and prompt assembly.
//!
//! The base encoder (tokenizer + embedding table) is immutable for the life
//! of a session; learnable concept tokens live in a placeholder registry
//! layered on top, with ids above the base vocabulary. Reads are safe to
//! share; registration and updates need exclusive access.

mod tokenizer;

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{all_finite, DetRng, Fingerprint};

pub use tokenizer::{TokenizerBackend, CLIP_VOCAB_SIZE};

pub type TokenId = u32;

/// An ℓ-dimensional vector in the text-encoder token-embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbedding {
    values: Vec<f64>,
}

impl TokenEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !all_finite(&values) {
            return Err(Error::InvalidRequest {
                reason: "token embedding contains non-finite entries".into(),
            });
        }
        Ok(TokenEmbedding { values })
    }

    pub fn zeros(dim: usize) -> Self {
        TokenEmbedding { values: vec![0.0; dim] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Ordered list of whole words decodable from single tokenizer entries.
#[derive(Debug, Clone)]
pub struct TokenUniverse {
    entries: Vec<(String, TokenId)>,
}

impl TokenUniverse {
    pub fn from_entries(entries: Vec<(String, TokenId)>) -> Self {
        TokenUniverse { entries }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    pub fn entries(&self) -> &[(String, TokenId)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A registered placeholder: a unique surface string bound to a vector.
#[derive(Debug, Clone)]
pub struct PlaceholderToken {
    pub surface: String,
    pub id: TokenId,
    pub trainable: bool,
}

#[derive(Debug)]
struct PlaceholderEntry {
    surface: String,
    values: Vec<f64>,
    trainable: bool,
}

#[derive(Clone)]
enum TableSource {
    /// Deterministic seeded rows; stands in for a real checkpoint table.
    Synthetic { seed: u64 },
    /// Explicit rows indexed by token id (loaded table or test fixture).
    Dense { rows: Vec<Vec<f64>> },
}

pub struct EmbeddingSpace {
    tokenizer: TokenizerBackend,
    table: TableSource,
    dim: usize,
    encoder_id: String,
    placeholders: Vec<PlaceholderEntry>,
    surface_index: HashMap<String, usize>,
    universe: std::cell::OnceCell<TokenUniverse>,
}

impl EmbeddingSpace {
    /// CLIP tokenizer with a deterministic synthetic embedding table.
    ///
    /// The default offline encoder: real token ids and universe, seeded
    /// ℓ-dimensional rows standing in for checkpoint weights.
    pub fn clip_synthetic(dim: usize, seed: u64) -> Self {
        EmbeddingSpace {
            tokenizer: TokenizerBackend::clip_default(),
            table: TableSource::Synthetic { seed },
            dim,
            encoder_id: format!("clip-bpe/synthetic-{dim}-{seed}"),
            placeholders: Vec::new(),
            surface_index: HashMap::new(),
            universe: std::cell::OnceCell::new(),
        }
    }

    /// CLIP tokenizer with an embedding table loaded from `path`.
    ///
    /// File layout: `u32le rows, u32le dim, f32le row-major data`. Exported
    /// from a pretrained checkpoint's token-embedding matrix.
    pub fn clip_from_table_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < 8 {
            return Err(Error::Config {
                reason: format!("embedding table {} too short", path.display()),
            });
        }
        let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let expected = 8 + rows * dim * 4;
        if bytes.len() != expected {
            return Err(Error::Config {
                reason: format!(
                    "embedding table {}: expected {expected} bytes for {rows}x{dim}, got {}",
                    path.display(),
                    bytes.len()
                ),
            });
        }
        let mut table = Vec::with_capacity(rows);
        let mut off = 8;
        for _ in 0..rows {
            let mut row = Vec::with_capacity(dim);
            for _ in 0..dim {
                row.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64);
                off += 4;
            }
            row_finite(&row)?;
            table.push(row);
        }
        Ok(EmbeddingSpace {
            tokenizer: TokenizerBackend::clip_default(),
            table: TableSource::Dense { rows: table },
            dim,
            encoder_id: format!("clip-bpe/table:{}", path.display()),
            placeholders: Vec::new(),
            surface_index: HashMap::new(),
            universe: std::cell::OnceCell::new(),
        })
    }

    /// Small exact-match encoder over explicit (word, row) pairs.
    pub fn word_list(pairs: Vec<(&str, Vec<f64>)>) -> Self {
        let dim = pairs.first().map(|(_, r)| r.len()).unwrap_or(0);
        let words: Vec<String> = pairs.iter().map(|(w, _)| w.to_lowercase()).collect();
        let tokenizer = TokenizerBackend::word_list(words.clone());
        // word ids start at 256; byte-fallback rows are zero vectors
        let mut rows = vec![vec![0.0; dim]; 256 + pairs.len()];
        for (idx, (_, row)) in pairs.into_iter().enumerate() {
            assert_eq!(row.len(), dim, "all rows must share one width");
            rows[256 + idx] = row;
        }
        EmbeddingSpace {
            tokenizer,
            table: TableSource::Dense { rows },
            dim,
            encoder_id: "word-list".into(),
            placeholders: Vec::new(),
            surface_index: HashMap::new(),
            universe: std::cell::OnceCell::new(),
        }
    }

    /// Word-list encoder with seeded random rows, handy when only shapes and
    /// determinism matter.
    pub fn word_list_seeded(words: &[&str], dim: usize, seed: u64) -> Self {
        let pairs: Vec<(&str, Vec<f64>)> = words
            .iter()
            .map(|w| {
                let mut rng = DetRng::derive(seed, &format!("word-{}", w.to_lowercase()));
                let scale = 1.0 / (dim as f64).sqrt();
                let row: Vec<f64> = rng.normal_vec(dim).iter().map(|v| v * scale).collect();
                (*w, row)
            })
            .collect();
        EmbeddingSpace::word_list(pairs)
    }

    /// A placeholder-free copy sharing this session's tokenizer and table.
    pub fn fresh(&self) -> EmbeddingSpace {
        EmbeddingSpace {
            tokenizer: self.tokenizer.clone(),
            table: self.table.clone(),
            dim: self.dim,
            encoder_id: self.encoder_id.clone(),
            placeholders: Vec::new(),
            surface_index: HashMap::new(),
            universe: std::cell::OnceCell::new(),
        }
    }

    /// Token-embedding width ℓ, constant within a session.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    fn base_vocab_len(&self) -> u32 {
        self.tokenizer.base_vocab_len()
    }

    fn base_row(&self, id: TokenId) -> Vec<f64> {
        match &self.table {
            TableSource::Synthetic { seed } => {
                let mut rng = DetRng::derive(*seed, &format!("row-{id}"));
                let scale = 1.0 / (self.dim as f64).sqrt();
                rng.normal_vec(self.dim).iter().map(|v| v * scale).collect()
            }
            TableSource::Dense { rows } => rows
                .get(id as usize)
                .cloned()
                .unwrap_or_else(|| vec![0.0; self.dim]),
        }
    }

    /// Embedding row for a token id, resolving placeholders to their current
    /// vectors.
    pub fn row(&self, id: TokenId) -> Result<Vec<f64>> {
        let base = self.base_vocab_len();
        if id >= base {
            let idx = (id - base) as usize;
            return self
                .placeholders
                .get(idx)
                .map(|p| p.values.clone())
                .ok_or_else(|| Error::UnknownToken { surface: format!("<id {id}>") });
        }
        Ok(self.base_row(id))
    }

    /// Resolve a token sequence into embedding rows (current placeholder
    /// values, never stale copies).
    pub fn resolve(&self, ids: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        ids.iter().map(|id| self.row(*id)).collect()
    }

    /// Single token id for a word or registered placeholder surface.
    pub fn token_id(&self, word: &str) -> Result<TokenId> {
        if let Some(idx) = self.surface_index.get(word) {
            return Ok(self.base_vocab_len() + *idx as u32);
        }
        let ids = self.tokenizer.encode_text(word);
        match ids.len() {
            1 => Ok(ids[0]),
            n => Err(Error::MultiTokenWord { word: word.to_string(), count: n }),
        }
    }

    /// Map a word (or placeholder surface) to its ℓ-dimensional embedding.
    pub fn embed_word(&self, word: &str) -> Result<TokenEmbedding> {
        let id = self.token_id(word)?;
        Ok(TokenEmbedding { values: self.row(id)? })
    }

    /// The deterministic whole-word universe of the backing tokenizer.
    pub fn token_universe(&self) -> &TokenUniverse {
        self.universe.get_or_init(|| {
            TokenUniverse::from_entries(self.tokenizer.enumerate_universe())
        })
    }

    /// Register a new learnable (or frozen) placeholder token.
    pub fn register_placeholder(
        &mut self,
        surface: &str,
        init: TokenEmbedding,
        trainable: bool,
    ) -> Result<PlaceholderToken> {
        if surface.trim().is_empty() {
            return Err(Error::InvalidRequest { reason: "empty placeholder surface".into() });
        }
        if self.surface_index.contains_key(surface) {
            return Err(Error::DuplicatePlaceholder { surface: surface.to_string() });
        }
        // A surface that already encodes as one base token IS a vocabulary
        // word; shadowing it would corrupt ordinary prompts.
        if self.tokenizer.encode_text(surface).len() == 1 {
            return Err(Error::DuplicatePlaceholder { surface: surface.to_string() });
        }
        if init.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: init.len() });
        }
        let idx = self.placeholders.len();
        self.placeholders.push(PlaceholderEntry {
            surface: surface.to_string(),
            values: init.into_values(),
            trainable,
        });
        self.surface_index.insert(surface.to_string(), idx);
        Ok(PlaceholderToken {
            surface: surface.to_string(),
            id: self.base_vocab_len() + idx as u32,
            trainable,
        })
    }

    /// Overwrite a placeholder's vector (training update or live rebinding).
    pub fn update_placeholder(&mut self, surface: &str, values: &[f64]) -> Result<()> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: values.len() });
        }
        let idx = *self
            .surface_index
            .get(surface)
            .ok_or_else(|| Error::UnknownToken { surface: surface.to_string() })?;
        self.placeholders[idx].values.clear();
        self.placeholders[idx].values.extend_from_slice(values);
        Ok(())
    }

    pub fn placeholder(&self, surface: &str) -> Option<PlaceholderToken> {
        self.surface_index.get(surface).map(|idx| PlaceholderToken {
            surface: self.placeholders[*idx].surface.clone(),
            id: self.base_vocab_len() + *idx as u32,
            trainable: self.placeholders[*idx].trainable,
        })
    }

    pub fn placeholder_surfaces(&self) -> impl Iterator<Item = &str> {
        self.placeholders.iter().map(|p| p.surface.as_str())
    }

    /// Assemble a prompt template into a token id sequence.
    ///
    /// Recognized slots: `{attrs}` expands to the attribute surfaces in
    /// order, `{obj}` to the object surface. A slot whose argument list is
    /// empty contributes nothing, so one template covers attribute-only and
    /// object-only prompts.
    pub fn assemble_prompt(
        &self,
        template: &str,
        attrs: &[&str],
        obj: Option<&str>,
    ) -> Result<Vec<TokenId>> {
        // a slot surface that fails to resolve is an unknown token, whatever
        // the tokenizer made of it
        let slot_id = |surface: &str| -> Result<TokenId> {
            self.token_id(surface).map_err(|_| Error::UnknownToken { surface: surface.into() })
        };
        let mut ids = Vec::new();
        for segment in parse_template(template) {
            match segment {
                Segment::Literal(text) => ids.extend(self.tokenizer.encode_text(text)),
                Segment::Attrs => {
                    for surface in attrs {
                        ids.push(slot_id(surface)?);
                    }
                }
                Segment::Obj => {
                    if let Some(surface) = obj {
                        ids.push(slot_id(surface)?);
                    }
                }
            }
        }
        Ok(ids)
    }

    /// Token ids for literal text, no slot handling.
    pub(crate) fn encode_literal(&self, text: &str) -> Vec<TokenId> {
        self.tokenizer.encode_text(text)
    }

    /// Encode a single-slot template (`{}`) filled with either a plain word
    /// or a resolvable token surface. Used by the metric prompts.
    pub fn encode_filled(&self, template: &str, filler: &SlotValue) -> Result<Vec<TokenId>> {
        let Some(pos) = template.find("{}") else {
            return Err(Error::InvalidRequest {
                reason: format!("template {template:?} has no {{}} slot"),
            });
        };
        let (before, after) = template.split_at(pos);
        let after = &after[2..];
        let mut ids = Vec::new();
        ids.extend(self.tokenizer.encode_text(before));
        match filler {
            SlotValue::Word(word) => ids.extend(self.tokenizer.encode_text(word)),
            SlotValue::Surface(surface) => ids.push(self.token_id(surface)?),
        }
        ids.extend(self.tokenizer.encode_text(after));
        Ok(ids)
    }

    /// Fingerprint over the base table; placeholders are excluded so that
    /// registration and training must leave this value unchanged.
    pub fn base_table_fingerprint(&self) -> String {
        let mut fp = Fingerprint::new();
        match &self.table {
            TableSource::Synthetic { seed } => {
                fp.add_str("synthetic");
                fp.add_bytes(&seed.to_le_bytes());
                fp.add_bytes(&(self.dim as u64).to_le_bytes());
                let n = self.base_vocab_len();
                let mut id = 0u32;
                while id < n {
                    fp.add_f64s(&self.base_row(id));
                    id += 769; // sampled rows; the generator itself is pure
                }
            }
            TableSource::Dense { rows } => {
                fp.add_str("dense");
                for row in rows {
                    fp.add_f64s(row);
                }
            }
        }
        fp.finish()
    }

    /// Mean row norm over (a deterministic sample of) the universe, used as
    /// the typical token scale for random initialization.
    pub fn mean_row_norm(&self) -> f64 {
        let universe = self.token_universe();
        let entries = universe.entries();
        if entries.is_empty() {
            return 1.0;
        }
        let step = (entries.len() / 1024).max(1);
        let mut total = 0.0;
        let mut count = 0usize;
        for (_, id) in entries.iter().step_by(step) {
            total += crate::math::norm(&self.base_row(*id));
            count += 1;
        }
        total / count as f64
    }
}

/// Filler for a single-slot metric template.
#[derive(Debug, Clone)]
pub enum SlotValue {
    Word(String),
    Surface(String),
}

pub(crate) enum TemplateSegment<'a> {
    Literal(&'a str),
    Attrs,
    Obj,
}

use TemplateSegment as Segment;

pub(crate) fn template_segments(template: &str) -> Vec<TemplateSegment<'_>> {
    parse_template(template)
}

fn parse_template(template: &str) -> Vec<Segment<'_>> {
    let mut segments = Vec::new();
    let mut rest = template;
    loop {
        let attrs_pos = rest.find("{attrs}");
        let obj_pos = rest.find("{obj}");
        let (pos, len, seg) = match (attrs_pos, obj_pos) {
            (Some(a), Some(o)) if a < o => (a, "{attrs}".len(), Segment::Attrs),
            (Some(_), Some(o)) => (o, "{obj}".len(), Segment::Obj),
            (Some(a), None) => (a, "{attrs}".len(), Segment::Attrs),
            (None, Some(o)) => (o, "{obj}".len(), Segment::Obj),
            (None, None) => break,
        };
        if pos > 0 {
            segments.push(Segment::Literal(&rest[..pos]));
        }
        segments.push(seg);
        rest = &rest[pos + len..];
    }
    if !rest.is_empty() {
        segments.push(Segment::Literal(rest));
    }
    segments
}

fn row_finite(row: &[f64]) -> Result<()> {
    if all_finite(row) {
        Ok(())
    } else {
        Err(Error::Config { reason: "embedding table contains non-finite entries".into() })
    }
}
