//! Tokenizer backends: the CLIP byte-pair tokenizer loaded from a merges
//! file, and an exact-match word-list tokenizer for small test setups.

use std::io::BufRead;
use std::sync::Arc;
use std::path::Path;

use instant_clip_tokenizer::{Token, Tokenizer};

use crate::error::{Error, Result};

/// Merges data for the standard CLIP text-encoder vocabulary, truncated to
/// the 48 894 rules the 49 408-token vocabulary actually uses.
pub const CLIP_BPE_MERGES: &str = include_str!("../../data/clip_bpe_merges.txt");

/// Vocabulary size of the standard CLIP tokenizer (incl. the two markers).
pub const CLIP_VOCAB_SIZE: u32 = 49_408;

#[derive(Clone)]
pub enum TokenizerBackend {
    /// Full byte-pair tokenizer, id space identical to the CLIP text encoder.
    ClipBpe(Arc<Tokenizer>),
    /// Exact-match lookup over an explicit word list; anything else splits
    /// into per-character tokens. Intended for small deterministic tests.
    WordList { words: Vec<String> },
}

impl TokenizerBackend {
    pub fn clip_default() -> Self {
        let tokenizer = Tokenizer::with_vocabulary(
            std::io::Cursor::new(CLIP_BPE_MERGES),
            CLIP_VOCAB_SIZE as u16,
        )
        .expect("bundled merges data is valid");
        TokenizerBackend::ClipBpe(Arc::new(tokenizer))
    }

    pub fn clip_from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let tokenizer =
            Tokenizer::with_vocabulary(std::io::BufReader::new(file), CLIP_VOCAB_SIZE as u16)
                .map_err(|e| Error::Config {
                    reason: format!("invalid merges file {}: {e}", path.display()),
                })?;
        Ok(TokenizerBackend::ClipBpe(Arc::new(tokenizer)))
    }

    pub fn word_list(words: Vec<String>) -> Self {
        TokenizerBackend::WordList { words }
    }

    /// Number of ids in the base vocabulary (placeholders are assigned above).
    pub fn base_vocab_len(&self) -> u32 {
        match self {
            TokenizerBackend::ClipBpe(_) => CLIP_VOCAB_SIZE,
            TokenizerBackend::WordList { words } => words.len() as u32 + 256,
        }
    }

    /// Encode free text into base-vocabulary token ids.
    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        match self {
            TokenizerBackend::ClipBpe(t) => {
                let mut out: Vec<Token> = Vec::new();
                t.encode(text, &mut out);
                out.into_iter().map(|tok| tok.to_u16() as u32).collect()
            }
            TokenizerBackend::WordList { words } => {
                let mut out = Vec::new();
                for word in text.split_whitespace() {
                    let folded = word.to_lowercase();
                    match words.iter().position(|w| *w == folded) {
                        // word ids sit above the 256 byte-fallback ids
                        Some(idx) => out.push(idx as u32 + 256),
                        None => out.extend(folded.bytes().map(|b| b as u32)),
                    }
                }
                out
            }
        }
    }

    /// Enumerate the whole-word universe: entries carrying the end-of-word
    /// marker, purely alphabetic, case-folded for dedup, and verified to
    /// round-trip through `encode_text` as exactly one token.
    ///
    /// Order is ascending token id, which for the byte-pair vocabulary tracks
    /// merge priority and therefore roughly corpus frequency.
    pub fn enumerate_universe(&self) -> Vec<(String, u32)> {
        match self {
            TokenizerBackend::ClipBpe(_) => {
                let mut seen = std::collections::HashSet::new();
                let mut entries: Vec<(String, u32)> = Vec::new();
                for stem in clip_word_candidates() {
                    let folded = stem.to_lowercase();
                    if !seen.insert(folded.clone()) {
                        continue;
                    }
                    let ids = self.encode_text(&folded);
                    if ids.len() == 1 {
                        entries.push((folded, ids[0]));
                    }
                }
                entries.sort_by_key(|(_, id)| *id);
                entries
            }
            TokenizerBackend::WordList { words } => {
                let mut seen = std::collections::HashSet::new();
                let mut entries = Vec::new();
                for (idx, word) in words.iter().enumerate() {
                    let folded = word.to_lowercase();
                    if folded.chars().all(|c| c.is_ascii_alphabetic())
                        && !folded.is_empty()
                        && seen.insert(folded.clone())
                    {
                        entries.push((folded, idx as u32 + 256));
                    }
                }
                entries
            }
        }
    }
}

/// Surfaces from the merges data that end in the end-of-word marker with a
/// purely alphabetic stem, plus the 26 single-letter word tokens.
fn clip_word_candidates() -> Vec<String> {
    let mut out: Vec<String> = ('a'..='z').map(|c| c.to_string()).collect();
    for line in std::io::Cursor::new(CLIP_BPE_MERGES).lines().skip(1) {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        let mut parts = line.split_whitespace();
        let (Some(first), Some(second)) = (parts.next(), parts.next()) else {
            continue;
        };
        let surface = format!("{first}{second}");
        if let Some(stem) = surface.strip_suffix("</w>") {
            if !stem.is_empty() && stem.chars().all(|c| c.is_ascii_alphabetic()) {
                out.push(stem.to_string());
            }
        }
    }
    out
}
